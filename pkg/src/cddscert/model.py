"""Linear coupled differential-difference systems with polynomial distributed kernels.

The model is

    x'(t) = A1 x(t) + A2 y(t-r) + int_{-r}^0 A3(r) L_d(tau) y(t+tau) dtau + D1 w(t)
    y(t)  = A4 x(t) + A5 y(t-r)
    z(t)  = C1 x(t) + C2 y(t-r) + int_{-r}^0 C3(r) L_d(tau) y(t+tau) dtau + D2 w(t)

with ``L_d(tau) = ell_d(tau) kron I_nu``.  ``A3`` and ``C3`` are polynomial
matrices in the delay ``r`` with ``e = (d+1) nu`` columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .legendre import build_basis
from .polymatrix import PolyMatrix

__all__ = [
    "ModelError",
    "CddsSystem",
    "SupplyRate",
    "DelayRange",
    "validate",
    "from_neutral",
    "monomial_kernel_to_legendre",
    "l2_gain_supply",
    "passivity_supply",
    "zero_supply",
]

RHO_MARGIN = 1e-9


class ModelError(ValueError):
    """Inconsistent or inadmissible system data."""


def _mat(a, rows: int | None = None, cols: int | None = None, name: str = "") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.size == 0:
        arr = np.zeros((rows or 0, cols or 0))
    arr = np.atleast_2d(arr) if arr.ndim < 2 else arr
    if rows is not None and arr.shape[0] != rows or cols is not None and arr.shape[1] != cols:
        raise ModelError(f"{name} has shape {arr.shape}, expected ({rows}, {cols})")
    return arr


def _poly(a, rows: int, cols: int, name: str) -> PolyMatrix:
    if a is None:
        return PolyMatrix.zeros(rows, cols)
    if not isinstance(a, PolyMatrix):
        arr = np.asarray(a, dtype=float)
        if arr.size % max(rows * cols, 1):
            raise ModelError(f"{name} has {arr.size} entries, not a multiple of {rows} x {cols}")
        a = PolyMatrix(arr.reshape(-1, rows, cols))
    pm = a
    if pm.shape != (rows, cols):
        raise ModelError(f"{name} has shape {pm.shape}, expected ({rows}, {cols})")
    return pm


@dataclass(frozen=True)
class CddsSystem:
    """State-space data of the coupled system at kernel degree ``d``.

    Missing matrices default to zero; ``m`` and ``q`` may be zero.
    """

    A1: np.ndarray
    A2: np.ndarray
    A4: np.ndarray
    A5: np.ndarray
    d: int = 0
    A3: PolyMatrix | None = None
    D1: np.ndarray | None = None
    C1: np.ndarray | None = None
    C2: np.ndarray | None = None
    C3: PolyMatrix | None = None
    D2: np.ndarray | None = None
    name: str = ""
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        A1 = _mat(self.A1, name="A1")
        n = A1.shape[0]
        A2 = _mat(self.A2, n, None, "A2")
        nu = A2.shape[1]
        if n < 1 or nu < 1:
            raise ModelError("n and nu must be at least 1")
        _mat(A1, n, n, "A1")
        A4 = _mat(self.A4, nu, n, "A4")
        A5 = _mat(self.A5, nu, nu, "A5")
        q = 0 if self.D1 is None else np.asarray(self.D1).reshape(n, -1).shape[1]
        if self.C1 is not None:
            m = np.atleast_2d(np.asarray(self.C1, dtype=float)).shape[0] if np.asarray(self.C1).size else 0
        elif self.D2 is not None and np.asarray(self.D2).size:
            m = np.atleast_2d(np.asarray(self.D2)).shape[0]
        else:
            m = 0
        e = (self.d + 1) * nu
        set_ = object.__setattr__
        set_(self, "A1", A1)
        set_(self, "A2", A2)
        set_(self, "A4", A4)
        set_(self, "A5", A5)
        set_(self, "A3", _poly(self.A3, n, e, "A3"))
        set_(self, "D1", _mat(np.zeros((n, q)) if self.D1 is None else np.asarray(self.D1, float).reshape(n, q), n, q, "D1"))
        set_(self, "C1", _mat(np.zeros((m, n)) if self.C1 is None else self.C1, m, n, "C1"))
        set_(self, "C2", _mat(np.zeros((m, nu)) if self.C2 is None else self.C2, m, nu, "C2"))
        set_(self, "C3", _poly(self.C3, m, e, "C3"))
        set_(self, "D2", _mat(np.zeros((m, q)) if self.D2 is None else self.D2, m, q, "D2"))

    # -- dimensions -------------------------------------------------------
    @property
    def n(self) -> int:
        return self.A1.shape[0]

    @property
    def nu(self) -> int:
        return self.A2.shape[1]

    @property
    def m(self) -> int:
        return self.C1.shape[0]

    @property
    def q(self) -> int:
        return self.D1.shape[1]

    @property
    def e(self) -> int:
        return (self.d + 1) * self.nu

    def at_degree(self, d: int) -> "CddsSystem":
        """Re-express the kernels in the degree-``d`` Legendre basis.

        Legendre families are nested, so raising ``d`` pads with zero blocks;
        lowering it is allowed only when the dropped blocks vanish.
        """
        if d == self.d:
            return self
        enew = (d + 1) * self.nu

        def lift(pm: PolyMatrix) -> PolyMatrix:
            c = pm.coeffs
            if d > self.d:
                return PolyMatrix(np.concatenate([c, np.zeros(c.shape[:2] + (enew - self.e,))], axis=2))
            if np.any(c[:, :, enew:] != 0):
                raise ModelError(f"kernel has nonzero components above degree {d}")
            return PolyMatrix(c[:, :, :enew])

        return replace(self, d=d, A3=lift(self.A3), C3=lift(self.C3))

    def without_io(self) -> "CddsSystem":
        """Drop disturbance and output channels (pure stability analysis)."""
        return replace(self, D1=np.zeros((self.n, 0)), C1=np.zeros((0, self.n)),
                       C2=np.zeros((0, self.nu)), C3=PolyMatrix.zeros(0, self.e),
                       D2=np.zeros((0, 0)))


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic supply ``s(z, w) = [z; w]^T [[J1, J2], [J2^T, J3]] [z; w]``.

    ``mode`` is one of

    * ``"strict"``: ``J1`` negative definite, handled through a Schur row;
    * ``"passivity"``: ``J1 = 0`` (including the all-zero supply used for
      pure stability), no Schur row;
    * ``"l2gain"``: ``J1 = -I/gamma``, ``J2 = 0``, ``J3 = gamma I``.  With
      ``gamma=None`` the gain is a decision variable and enters only through
      ``J1^{-1} = -gamma I`` and ``J3``.
    """

    m: int
    q: int
    mode: str
    J1: np.ndarray | None = None
    J2: np.ndarray | None = None
    J3: np.ndarray | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.mode not in ("strict", "passivity", "l2gain"):
            raise ModelError(f"unknown supply mode {self.mode!r}")
        if self.mode == "l2gain":
            return
        J1 = _mat(self.J1 if self.J1 is not None else np.zeros((self.m, self.m)), self.m, self.m, "J1")
        J2 = _mat(self.J2 if self.J2 is not None else np.zeros((self.m, self.q)), self.m, self.q, "J2")
        J3 = _mat(self.J3 if self.J3 is not None else np.zeros((self.q, self.q)), self.q, self.q, "J3")
        if not (np.allclose(J1, J1.T) and np.allclose(J3, J3.T)):
            raise ModelError("J1 and J3 must be symmetric")
        ev = np.linalg.eigvalsh(J1) if self.m else np.zeros(0)
        if np.any(ev > 1e-12):
            raise ModelError("J1 must be negative semidefinite")
        if self.mode == "strict" and self.m and not np.all(ev < 0):
            raise ModelError("strict supply requires J1 negative definite")
        if self.mode == "passivity" and np.any(J1 != 0):
            raise ModelError("passivity supply requires J1 = 0")
        object.__setattr__(self, "J1", J1)
        object.__setattr__(self, "J2", J2)
        object.__setattr__(self, "J3", J3)

    @property
    def gamma_variable(self) -> bool:
        return self.mode == "l2gain" and self.gamma is None

    @property
    def schur(self) -> bool:
        return self.mode in ("strict", "l2gain") and self.m > 0

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Numeric ``(J1, J2, J3)``; unavailable when the gain is a variable."""
        if self.mode != "l2gain":
            return self.J1, self.J2, self.J3
        if self.gamma is None:
            raise ModelError("gamma is a decision variable")
        g = self.gamma
        return -np.eye(self.m) / g, np.zeros((self.m, self.q)), g * np.eye(self.q)

    def J1_inverse(self) -> np.ndarray:
        if self.mode == "l2gain":
            if self.gamma is None:
                raise ModelError("gamma is a decision variable")
            return -self.gamma * np.eye(self.m)
        if self.mode != "strict":
            raise ModelError("no J1 inverse outside strict mode")
        try:
            return np.linalg.inv(self.J1)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - excluded by validation
            raise ModelError("J1 is singular") from exc

    def value(self, z, w) -> float:
        J1, J2, J3 = self.matrices()
        z = np.asarray(z, float).reshape(-1)
        w = np.asarray(w, float).reshape(-1)
        return float(z @ J1 @ z + 2 * z @ J2 @ w + w @ J3 @ w)


@dataclass(frozen=True)
class DelayRange:
    r1: float
    r2: float

    def __post_init__(self):
        if not (self.r2 > self.r1 > 0):
            raise ModelError(f"delay range needs r2 > r1 > 0, got [{self.r1}, {self.r2}]")

    @property
    def g(self) -> np.ndarray:
        """Ascending coefficients of ``(r - r1)(r - r2)``."""
        return np.array([self.r1 * self.r2, -(self.r1 + self.r2), 1.0])

    def grid(self, npoints: int = 200) -> np.ndarray:
        return np.linspace(self.r1, self.r2, npoints)


def l2_gain_supply(gamma: float | None, m: int, q: int) -> SupplyRate:
    if gamma is not None and not gamma > 0:
        raise ModelError(f"gamma must be positive, got {gamma}")
    return SupplyRate(m=m, q=q, mode="l2gain", gamma=None if gamma is None else float(gamma))


def passivity_supply(m: int, J2=None) -> SupplyRate:
    """``J1 = 0``, ``J2 = I/2`` (unless given), ``J3 = 0``; requires ``m == q``."""
    J2 = 0.5 * np.eye(m) if J2 is None else np.asarray(J2, float)
    if J2.shape[0] != J2.shape[1]:
        raise ModelError("passivity requires as many outputs as disturbances")
    return SupplyRate(m=m, q=J2.shape[1], mode="passivity", J2=J2)


def zero_supply(m: int = 0, q: int = 0) -> SupplyRate:
    return SupplyRate(m=m, q=q, mode="passivity")


def validate(sys: CddsSystem, eps_rho: float = RHO_MARGIN) -> dict:
    """Dimension audit and difference-operator check ``rho(A5) < 1``.

    Raises
    ------
    ModelError
        On inconsistent dimensions or ``rho(A5) >= 1 - eps_rho``.
    """
    for name, pm, rows in (("A3", sys.A3, sys.n), ("C3", sys.C3, sys.m)):
        if pm.shape != (rows, sys.e):
            raise ModelError(f"{name} must be {rows}x{sys.e}, got {pm.shape}")
    rho = float(np.max(np.abs(np.linalg.eigvals(sys.A5)))) if sys.nu else 0.0
    if rho >= 1.0 - eps_rho:
        raise ModelError(f"difference operator not stable: rho(A5) = {rho:.12g}")
    return {"n": sys.n, "nu": sys.nu, "m": sys.m, "q": sys.q, "d": sys.d, "e": sys.e,
            "rho_A5": rho, "A3_degree": sys.A3.degree, "C3_degree": sys.C3.degree}


def monomial_kernel_to_legendre(kernel: Sequence, d: int, nu: int) -> PolyMatrix:
    """Rewrite ``sum_i K_i tau**i`` as ``A3(r) L_d(tau)``.

    Parameters
    ----------
    kernel : sequence of (rows, nu) arrays
        Monomial coefficients ``K_0 .. K_p``.
    d : int
        Target Legendre degree, ``d >= p``.
    nu : int
        Width of each coefficient block.
    """
    mats = [np.atleast_2d(np.asarray(k, dtype=float)) for k in kernel]
    p = len(mats) - 1
    if p > d:
        raise ModelError(f"kernel degree {p} exceeds basis degree {d}")
    rows = mats[0].shape[0] if mats else 0
    for k in mats:
        if k.shape != (rows, nu):
            raise ModelError(f"kernel block has shape {k.shape}, expected ({rows}, {nu})")
    lam_inv = build_basis(d).lam_inv
    out = np.zeros((d + 1, rows, (d + 1) * nu))
    # block column k of A (L^{-1}(r) kron I) = sum_i K_i r^i lam_inv[i][k]
    for i, K in enumerate(mats):
        for k in range(d + 1):
            c = lam_inv[i][k]
            if c:
                out[i, :, k * nu: (k + 1) * nu] += float(c) * K
    return PolyMatrix(out).trimmed()


def from_neutral(A1, A2, A4, *, A3=None, D1=None, C1=None, C2=None, C3=None, D2=None,
                 d: int = 0, name: str = "") -> CddsSystem:
    """Coupled form of ``d/dt (y - A4 y(t-r)) = A1 y + A2 y(t-r) + ... + D1 w``.

    With ``x = y - A4 y(t-r)`` the coupled matrices are ``(A1, A1 A4 + A2)``
    for the state, ``y = x + A4 y(t-r)`` for the difference equation and
    ``(C1, C1 A4 + C2)`` for the output.
    """
    A1 = _mat(A1, name="A1")
    n = A1.shape[0]
    A2 = _mat(A2, n, n, "A2")
    A4 = _mat(A4, n, n, "A4")
    rho = float(np.max(np.abs(np.linalg.eigvals(A4))))
    if rho >= 1.0 - RHO_MARGIN:
        raise ModelError(f"neutral operator not stable: rho(A4) = {rho:.12g}")
    C1a = None if C1 is None else _mat(C1, None, n, "C1")
    C2a = None if C2 is None else _mat(C2, None, n, "C2")
    if C1a is None and C2a is not None:
        C1a = np.zeros((C2a.shape[0], n))
    C2new = None if C1a is None else C1a @ A4 + (C2a if C2a is not None else 0.0)
    return CddsSystem(
        A1=A1, A2=A1 @ A4 + A2, A3=A3, A4=np.eye(n), A5=A4, d=d, D1=D1,
        C1=C1a, C2=C2new, C3=C3, D2=D2, name=name,
        notes=("converted from neutral form; output coupling C1 A4 + C2",),
    )
