"""Polynomial matrix inequalities for a complete-type quadratic functional.

The functional is

    v = eta^T P(r) eta + int_{-r}^0 y(t+tau)^T [r S(r) + (tau + r) U(r)] y(t+tau) dtau,
    eta = [x; int_{-r}^0 L_d(tau) y(t+tau) dtau]

with ``P``, ``S``, ``U`` symmetric polynomial matrices in ``r``.  Along
trajectories its dissipation is a quadratic form in

    chi = col(w, x, y(t-r), (1/r) int_{-r}^0 L_d(tau) y(t+tau) dtau)

whose matrix ``Phi(r)`` is built here, together with the positivity
condition ``Pi(r)`` and the Schur-completed dissipation matrix ``Theta(r)``.
Everything is affine in the coefficients of ``P``, ``S``, ``U`` (and the
gain when it is free).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .legendre import LegendreBasis, build_basis
from .model import CddsSystem, SupplyRate
from .polymatrix import AffinePolyMatrix, PolyMatrix, block_compose, gram_affine

__all__ = [
    "FunctionalDegrees",
    "DecisionLayout",
    "FunctionalVariables",
    "allocate_functional",
    "build_gamma_sigma",
    "build_derivative_factor",
    "build_phi",
    "build_theta",
    "build_pi",
]


@dataclass(frozen=True)
class FunctionalDegrees:
    """Polynomial degrees in ``r`` of ``P``, ``S`` and ``U``."""

    lam1: int = 0
    lam2: int = 0
    lam3: int = 0

    def __post_init__(self):
        for v in (self.lam1, self.lam2, self.lam3):
            if int(v) != v or v < 0:
                raise ValueError(f"functional degrees must be nonnegative integers, got {self}")


@dataclass
class DecisionLayout:
    """Sequential allocator of scalar decision variables.

    ``groups`` maps a group name to its ``(start, stop)`` id range.
    """

    nvars: int = 0
    groups: dict = field(default_factory=dict)

    def allocate(self, name: str, count: int) -> np.ndarray:
        if name in self.groups:
            raise ValueError(f"variable group {name!r} already allocated")
        start = self.nvars
        self.nvars += int(count)
        self.groups[name] = (start, self.nvars)
        return np.arange(start, self.nvars)

    def scalar(self, name: str) -> int:
        return int(self.allocate(name, 1)[0])

    def sym_poly(self, name: str, size: int, degree: int) -> AffinePolyMatrix:
        """Symmetric ``size x size`` polynomial of the given degree with free coefficients."""
        iu, ju = np.triu_indices(size)
        per = iu.size
        ids = self.allocate(name, per * (degree + 1))
        terms = np.zeros((ids.size, degree + 1, size, size))
        for k in range(degree + 1):
            for t, (a, b) in enumerate(zip(iu, ju)):
                v = k * per + t
                terms[v, k, a, b] = 1.0
                terms[v, k, b, a] = 1.0
        return AffinePolyMatrix(PolyMatrix.zeros(size, size, degree), ids, terms)

    def gram(self, name: str, base_dim: int, half_degree: int) -> tuple[AffinePolyMatrix, int]:
        """Gram-parameterized polynomial; returns it with the first variable id."""
        n = (half_degree + 1) * base_dim
        first = self.nvars
        self.allocate(name, n * (n + 1) // 2)
        return gram_affine(base_dim, half_degree, first), first

    def group_of(self, var: int) -> str:
        for name, (a, b) in self.groups.items():
            if a <= var < b:
                return name
        raise KeyError(var)


@dataclass
class FunctionalVariables:
    """Decision-variable parameterization of one functional."""

    deg: FunctionalDegrees
    P: AffinePolyMatrix
    S: AffinePolyMatrix
    U: AffinePolyMatrix
    gamma: int | None = None


def allocate_functional(layout: DecisionLayout, sys: CddsSystem, deg: FunctionalDegrees,
                        gamma_free: bool = False) -> FunctionalVariables:
    """Allocate ``P`` (size ``n+e``), ``S``, ``U`` (size ``nu``) and optionally the gain."""
    P = layout.sym_poly("P", sys.n + sys.e, deg.lam1)
    S = layout.sym_poly("S", sys.nu, deg.lam2)
    U = layout.sym_poly("U", sys.nu, deg.lam3)
    g = layout.scalar("gamma") if gamma_free else None
    return FunctionalVariables(deg, P, S, U, g)


def build_gamma_sigma(sys: CddsSystem) -> tuple[np.ndarray, PolyMatrix]:
    """``Gamma = [0 A4 A5 0]`` and ``Sigma(r) = [D2 C1 C2 r C3(r)]`` in the ``chi`` ordering."""
    q, nu, e, m = sys.q, sys.nu, sys.e, sys.m
    Gamma = np.hstack([np.zeros((nu, q)), sys.A4, sys.A5, np.zeros((nu, e))])
    Sigma = block_compose([[PolyMatrix.constant(sys.D2) if q else PolyMatrix.zeros(m, 0),
                            PolyMatrix.constant(sys.C1),
                            PolyMatrix.constant(sys.C2),
                            sys.C3.shift(1)]])
    return Gamma, Sigma


def build_derivative_factor(sys: CddsSystem, basis: LegendreBasis | None = None) -> PolyMatrix:
    """Matrix mapping ``chi`` to ``d/dt [x; (1/r) int L y]`` times ``diag(I, r I)``.

    Top block row ``[D1 A1 A2 r A3(r)]``; bottom block row
    ``[0, L(0) A4, L(0) A5 - L(-r), -L' kron I]``.
    """
    basis = basis or build_basis(sys.d)
    if basis.d != sys.d:
        raise ValueError("basis degree does not match the system")
    q, n, nu, e = sys.q, sys.n, sys.nu, sys.e
    l0 = np.kron(basis.at_zero[:, None], np.eye(nu))
    lr = np.kron(basis.at_minus_r[:, None], np.eye(nu))
    top = [PolyMatrix.constant(sys.D1) if q else PolyMatrix.zeros(n, 0),
           PolyMatrix.constant(sys.A1), PolyMatrix.constant(sys.A2), sys.A3.shift(1)]
    bottom = [PolyMatrix.zeros(e, q), PolyMatrix.constant(l0 @ sys.A4),
              PolyMatrix.constant(l0 @ sys.A5 - lr),
              PolyMatrix.constant(-np.kron(basis.lprime_matrix, np.eye(nu)))]
    return block_compose([top, bottom])


def _state_selector(sys: CddsSystem) -> PolyMatrix:
    # chi-rows x (n+e): identity on x, r*identity on the integral block
    q, n, nu, e = sys.q, sys.n, sys.nu, sys.e
    return block_compose([
        [PolyMatrix.zeros(q, n), PolyMatrix.zeros(q, e)],
        [PolyMatrix.identity(n), PolyMatrix.zeros(n, e)],
        [PolyMatrix.zeros(nu, n), PolyMatrix.zeros(nu, e)],
        [PolyMatrix.zeros(e, n), PolyMatrix.monomial(np.eye(e), 1)],
    ])


def _scaled_identity(size: int, scalar_var: int | None, value: float) -> AffinePolyMatrix | PolyMatrix:
    if scalar_var is None:
        return PolyMatrix.constant(value * np.eye(size))
    terms = np.eye(size)[None, None]
    return AffinePolyMatrix(PolyMatrix.zeros(size, size), [scalar_var], terms)


def build_phi(sys: CddsSystem, fv: FunctionalVariables, J: SupplyRate,
              basis: LegendreBasis | None = None) -> AffinePolyMatrix:
    """Dissipation matrix ``Phi(r)`` in the ``chi`` coordinates.

    ``dv/dt - s(z, w) = chi^T Phi chi - z^T J1 z``.  The ``J1`` term is left
    to the Schur row of :func:`build_theta`, so ``Phi`` only carries ``-J3``
    and ``-Sy(Sigma^T J2)``.
    """
    basis = basis or build_basis(sys.d)
    q, n, nu, e = sys.q, sys.n, sys.nu, sys.e
    Gamma, Sigma = build_gamma_sigma(sys)
    Ed = build_derivative_factor(sys, basis)
    E = _state_selector(sys)
    phi = fv.P.lmul(E).rmul(Ed).sym_double()
    SU = (fv.S + fv.U).shift(1)
    phi = phi + SU.lmul(PolyMatrix.constant(Gamma.T)).rmul(PolyMatrix.constant(Gamma))
    # subtract diag(J3, 0_n, r S, r D kron U)
    if J.gamma_variable:
        J3 = _scaled_identity(q, fv.gamma, 1.0)
        J2 = np.zeros((sys.m, q))
    elif J.mode == "l2gain":
        _, J2, J3m = J.matrices()
        J3 = PolyMatrix.constant(J3m)
    else:
        J3 = PolyMatrix.constant(J.J3)
        J2 = J.J2
    diag = block_compose([
        [J3 if q else PolyMatrix.zeros(0, 0), None, None, None],
        [None, PolyMatrix.zeros(n, n), None, None],
        [None, None, fv.S.shift(1), None],
        [None, None, None, fv.U.kron_left(basis.weight).shift(1)],
    ])
    phi = phi - diag
    if q and sys.m and np.any(J2 != 0):
        cols = q + n + nu + e
        SJ = Sigma.T @ PolyMatrix.constant(J2)  # cols x q
        pad = block_compose([[SJ, PolyMatrix.zeros(cols, cols - q)]])
        phi = phi - pad.sym_double()
    return phi


def build_theta(sys: CddsSystem, fv: FunctionalVariables, J: SupplyRate,
                basis: LegendreBasis | None = None) -> AffinePolyMatrix:
    """``[[J1^{-1}, Sigma], [Sigma^T, Phi]]`` when ``J1`` is invertible, else ``Phi``.

    Negative definiteness on the delay range is the dissipation condition.
    """
    phi = build_phi(sys, fv, J, basis)
    if not J.schur:
        return phi
    _, Sigma = build_gamma_sigma(sys)
    if J.gamma_variable:
        top = _scaled_identity(sys.m, fv.gamma, 1.0) * -1.0
    else:
        top = PolyMatrix.constant(J.J1_inverse())
    return block_compose([[top, Sigma], [Sigma.T, phi]])


def build_pi(sys: CddsSystem, fv: FunctionalVariables, basis: LegendreBasis | None = None) -> AffinePolyMatrix:
    """Positivity matrix ``P(r) + diag(0_n, D_d kron S(r))``."""
    basis = basis or build_basis(sys.d)
    extra = block_compose([[PolyMatrix.zeros(sys.n, sys.n), None],
                           [None, fv.S.kron_left(basis.weight)]])
    return fv.P + extra

