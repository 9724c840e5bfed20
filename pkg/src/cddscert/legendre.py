"""Shifted Legendre polynomials on the delay window ``[-r, 0]``.

The basis vector ``ell_d(tau)`` stacks the polynomials of degree ``0..d``

    ell_i(tau) = sum_k C(i, k) C(i + k, k) (tau / r)**k,

so that ``ell_i(0) = 1``, ``ell_i(-r) = (-1)**i`` and the Gram matrix over
the window is ``diag(r / (2k + 1))``.  The structural matrices are kept in
exact integer / rational arithmetic and only converted to floats at
evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

__all__ = [
    "LegendreBasis",
    "build_basis",
    "eval_basis",
    "inverse_scaling",
    "basis_gram",
]


def _check_r(r: float) -> float:
    r = float(r)
    if not r > 0.0:
        raise ValueError(f"delay r must be positive, got {r!r}")
    return r


@dataclass(frozen=True)
class LegendreBasis:
    """Degree-``d`` basis data.

    Attributes
    ----------
    d : int
        Highest polynomial degree.
    lam : tuple of tuple of int
        Lower-triangular coefficient matrix, ``lam[i][k] = C(i,k) C(i+k,k)``.
    lam_inv : tuple of tuple of Fraction
        Exact inverse of ``lam``.
    lprime : tuple of tuple of int
        Strictly lower-triangular derivative matrix: ``d ell/d tau = lprime @ ell / r``.
    """

    d: int
    lam: tuple = field(repr=False)
    lam_inv: tuple = field(repr=False)
    lprime: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.d + 1

    @property
    def lambda_matrix(self) -> np.ndarray:
        return np.array(self.lam, dtype=float)

    @property
    def lambda_inverse(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.lam_inv])

    @property
    def lprime_matrix(self) -> np.ndarray:
        return np.array(self.lprime, dtype=float)

    @property
    def weight(self) -> np.ndarray:
        """``D_d = diag(1, 3, ..., 2d+1)``."""
        return np.diag(2.0 * np.arange(self.size) + 1.0)

    @property
    def at_zero(self) -> np.ndarray:
        """``ell_d(0)``: all ones."""
        return np.ones(self.size)

    @property
    def at_minus_r(self) -> np.ndarray:
        """``ell_d(-r)``: alternating signs, independent of ``r``."""
        return np.array([(-1.0) ** i for i in range(self.size)])


def _lower_inverse(lam: list[list[int]]) -> list[list[Fraction]]:
    # forward substitution column by column; lam is lower triangular
    n = len(lam)
    inv = [[Fraction(0)] * n for _ in range(n)]
    for col in range(n):
        for i in range(col, n):
            acc = Fraction(int(i == col))
            for k in range(col, i):
                acc -= lam[i][k] * inv[k][col]
            inv[i][col] = acc / lam[i][i]
    return inv


def build_basis(d: int) -> LegendreBasis:
    """Construct the integer coefficient matrix and derivative matrix for degree ``d``."""
    if int(d) != d or d < 0:
        raise ValueError(f"degree must be a nonnegative integer, got {d!r}")
    d = int(d)
    n = d + 1
    lam = [[comb(i, k) * comb(i + k, k) if k <= i else 0 for k in range(n)] for i in range(n)]
    lam_inv = _lower_inverse(lam)
    # d/dtau of the monomial vector with r = 1 is the sub-diagonal shift
    # diag(1..d) below the main diagonal; conjugate it by lam.
    shift = [[Fraction(i) if k == i - 1 else Fraction(0) for k in range(n)] for i in range(n)]
    tmp = [[sum(lam[i][j] * shift[j][k] for j in range(n)) for k in range(n)] for i in range(n)]
    prod = [[sum(tmp[i][j] * lam_inv[j][k] for j in range(n)) for k in range(n)] for i in range(n)]
    lprime = []
    for row in prod:
        if any(v.denominator != 1 for v in row):
            raise ArithmeticError("derivative matrix is not integral")  # pragma: no cover
        lprime.append(tuple(int(v) for v in row))
    return LegendreBasis(
        d=d,
        lam=tuple(tuple(row) for row in lam),
        lam_inv=tuple(tuple(row) for row in lam_inv),
        lprime=tuple(lprime),
    )


def eval_basis(b: LegendreBasis, r: float, tau) -> np.ndarray:
    """Evaluate ``ell_d(tau)`` for scalar or array ``tau``.

    Returns shape ``(d+1,)`` for scalar ``tau`` and ``(d+1, len(tau))`` otherwise.
    """
    r = _check_r(r)
    tau = np.asarray(tau, dtype=float)
    powers = (tau[..., None] / r) ** np.arange(b.size)
    return np.moveaxis(powers @ b.lambda_matrix.T, -1, 0)


def inverse_scaling(b: LegendreBasis, r: float) -> np.ndarray:
    """``L_d(r)^{-1} = diag(r**i) @ lam^{-1}``, mapping ``ell_d`` back to monomials."""
    r = _check_r(r)
    return (r ** np.arange(b.size))[:, None] * b.lambda_inverse


def basis_gram(b: LegendreBasis, r: float) -> np.ndarray:
    """``int_{-r}^0 ell ell^T dtau = diag(r / (2k+1))``."""
    r = _check_r(r)
    return np.diag(r / (2.0 * np.arange(b.size) + 1.0))
