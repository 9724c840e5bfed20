"""Solver-independent cross-checks.

* :func:`simulate` integrates the coupled system by the method of steps.
* :func:`dissipation_check` evaluates a certified functional along a
  simulated trajectory and tests the dissipation inequality.
* :func:`freq_response` / :func:`sigma_sweep` compute the transfer matrix
  and its peak gain on the imaginary axis.
* :func:`bessel_check` evaluates both sides of the Legendre projection
  bound used to handle the integral terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .legendre import LegendreBasis, build_basis, eval_basis
from .model import CddsSystem, SupplyRate, validate

__all__ = [
    "Trajectory",
    "FrequencyResponse",
    "simulate",
    "simpson_weights",
    "functional_value",
    "dissipation_check",
    "kernel_moments",
    "freq_response",
    "sigma_sweep",
    "bessel_check",
    "write_csv",
]


def simpson_weights(npts: int, step: float) -> np.ndarray:
    """Composite Simpson weights for an odd number of equally spaced nodes."""
    if npts < 3 or npts % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of nodes >= 3")
    w = np.ones(npts)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * step / 3.0


def write_csv(path, header: list[str], columns: list[np.ndarray], comment: str = "") -> None:
    """Write equally long columns as CSV with one header line (plus optional ``#`` comment)."""
    data = np.column_stack([np.asarray(c) for c in columns])
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


@dataclass
class Trajectory:
    """Simulation output on the grid ``t_k = k h`` (``h = r / N``).

    ``y_half`` holds ``y`` on the half-step grid from ``-r`` to ``T``;
    entry ``j`` is the value at ``(j - 2N) h / 2``.
    """

    r: float
    N: int
    h: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: np.ndarray
    y_half: np.ndarray

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def window(self, k: int) -> np.ndarray:
        """``y`` at the ``2N+1`` half-grid nodes of ``[t_k - r, t_k]``."""
        j = 2 * k + 2 * self.N
        return self.y_half[j - 2 * self.N: j + 1]

    def to_csv(self, path) -> None:
        cols = [self.t] + [self.x[:, i] for i in range(self.x.shape[1])] \
            + [self.y[:, i] for i in range(self.y.shape[1])] \
            + [self.z[:, i] for i in range(self.z.shape[1])] \
            + [self.w[:, i] for i in range(self.w.shape[1])]
        head = ["t"] + [f"x{i}" for i in range(self.x.shape[1])] + [f"y{i}" for i in range(self.y.shape[1])] \
            + [f"z{i}" for i in range(self.z.shape[1])] + [f"w{i}" for i in range(self.w.shape[1])]
        write_csv(path, head, cols, comment=f"trajectory r={float(self.r)!r} h={float(self.h)!r}")


def _kernel_nodes(kernel, basis: LegendreBasis, r: float, N: int, h: float) -> np.ndarray:
    # weight_j * K(r) (ell(tau_j) kron I) for the Simpson nodes tau_j on [-r, 0]
    K = kernel(r)
    nu = K.shape[1] // basis.size if basis.size else 0
    tau = np.linspace(-r, 0.0, 2 * N + 1)
    ell = eval_basis(basis, r, tau)             # (d+1, 2N+1)
    wts = simpson_weights(2 * N + 1, h / 2)
    blocks = K.reshape(K.shape[0], basis.size, nu)
    return np.einsum("aib,ij,j->jab", blocks, ell, wts)


def simulate(sys: CddsSystem, r: float, w: Callable | None = None, x0=None,
             phi: Callable | None = None, h: float | None = None, T: float = 10.0,
             N: int = 50) -> Trajectory:
    """Method-of-steps simulation with the classical fourth-order Runge-Kutta scheme.

    Parameters
    ----------
    sys : CddsSystem
    r : float
        Delay.
    w : callable, optional
        Disturbance ``w(t)`` returning shape ``(q,)``; zero by default.
    x0 : array_like, optional
        Initial state; zero by default.
    phi : callable, optional
        Initial history ``y(t)`` for ``t`` in ``[-r, 0)``; zero by default.
        Only its values on the half-step grid are used, so jumps are allowed.
    h : float, optional
        Step; must divide ``r`` into an integer ``N >= 50``.  Overrides ``N``.
    T : float
        Horizon, rounded up to a whole number of steps.
    N : int
        Steps per delay when ``h`` is not given.

    Notes
    -----
    ``y`` on the grid satisfies the difference equation exactly.  The
    half-step values needed by the Runge-Kutta stages and by Simpson's rule
    for the distributed term come from cubic Hermite interpolation of ``x``.
    """
    validate(sys)
    if not r > 0:
        raise ValueError("delay must be positive")
    if h is not None:
        ratio = r / h
        N = int(round(ratio))
        if abs(ratio - N) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"step {h} does not divide the delay {r}")
    if int(N) != N or N < 50:
        raise ValueError("N must be an integer >= 50 (h = r/N)")
    N = int(N)
    h = r / N
    K = int(np.ceil(T / h - 1e-9))
    n, nu, m, q = sys.n, sys.nu, sys.m, sys.q
    basis = build_basis(sys.d)
    KA = _kernel_nodes(sys.A3, basis, r, N, h)
    KC = _kernel_nodes(sys.C3, basis, r, N, h) if m else np.zeros((2 * N + 1, 0, nu))
    wfun = w if w is not None else (lambda t: np.zeros(q))
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)

    Y = np.zeros((2 * N + 2 * K + 1, nu))
    if phi is not None:
        for j in range(2 * N):
            Y[j] = np.asarray(phi((j - 2 * N) * h / 2), dtype=float).reshape(nu)
    # left limits on the full-step grid; y jumps at multiples of r when y(0) != phi(0)
    YL = Y[0::2].copy()
    if phi is not None:
        YL[N] = np.asarray(phi(0.0), dtype=float).reshape(nu)
    A1, A2, A4, A5, D1 = sys.A1, sys.A2, sys.A4, sys.A5, sys.D1

    def rhs(j, xs, ycur, ymid=None, left=False):
        # derivative at half-grid index j given the current y and optional provisional midpoint
        win = Y[j - 2 * N: j + 1].copy()
        win[-1] = ycur
        if ymid is not None:
            win[-2] = ymid
        t = (j - 2 * N) * h / 2
        yd = YL[(j - 2 * N) // 2] if left else Y[j - 2 * N]
        return A1 @ xs + A2 @ yd + np.einsum("jab,jb->a", KA, win) + D1 @ np.asarray(wfun(t), float).reshape(q)

    def yat(j, xs, left=False):
        return A4 @ xs + A5 @ (YL[(j - 2 * N) // 2] if left else Y[j - 2 * N])

    xs = np.zeros((K + 1, n))
    xs[0] = x
    Y[2 * N] = yat(2 * N, x)
    f = rhs(2 * N, x, Y[2 * N])
    for k in range(K):
        j = 2 * N + 2 * k
        k1 = f
        x2 = x + 0.5 * h * k1
        k2 = rhs(j + 1, x2, yat(j + 1, x2))
        x3 = x + 0.5 * h * k2
        k3 = rhs(j + 1, x3, yat(j + 1, x3))
        x4 = x + h * k3
        xm = x + 0.25 * h * (k1 + 0.5 * (k2 + k3))
        k4 = rhs(j + 2, x4, yat(j + 2, x4, True), yat(j + 1, xm), True)
        xn = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        Y[j + 2] = yat(j + 2, xn)
        YL[N + k + 1] = yat(j + 2, xn, True)
        fn = rhs(j + 2, xn, YL[N + k + 1], yat(j + 1, xm), True)
        xmid = 0.5 * (x + xn) + h / 8.0 * (k1 - fn)
        Y[j + 1] = yat(j + 1, xmid)
        f = rhs(j + 2, xn, Y[j + 2])
        x = xn
        xs[k + 1] = x
    t = h * np.arange(K + 1)
    ys = Y[2 * N::2]
    ws = np.array([np.asarray(wfun(tk), float).reshape(q) for tk in t]) if q else np.zeros((K + 1, 0))
    zs = np.zeros((K + 1, m))
    if m:
        for k in range(K + 1):
            j = 2 * N + 2 * k
            zs[k] = sys.C1 @ xs[k] + sys.C2 @ Y[j - 2 * N] \
                + np.einsum("jab,jb->a", KC, Y[j - 2 * N: j + 1]) + sys.D2 @ ws[k]
    return Trajectory(r=r, N=N, h=h, t=t, x=xs, y=ys, z=zs, w=ws, y_half=Y)


# -- dissipation ------------------------------------------------------------------


def functional_value(traj: Trajectory, k: int, P: np.ndarray, S: np.ndarray, U: np.ndarray,
                     basis: LegendreBasis) -> float:
    """``eta^T P eta + int y^T (r S + (tau + r) U) y`` at ``t_k`` by Simpson quadrature."""
    r, N = traj.r, traj.N
    win = traj.window(k)
    tau = np.linspace(-r, 0.0, 2 * N + 1)
    wts = simpson_weights(2 * N + 1, traj.h / 2)
    ell = eval_basis(basis, r, tau)
    integ = np.einsum("ij,j,jb->ib", ell, wts, win).reshape(-1)
    eta = np.concatenate([traj.x[k], integ])
    quad = np.einsum("ja,ab,jb->j", win, r * S, win) + (tau + r) * np.einsum("ja,ab,jb->j", win, U, win)
    return float(eta @ P @ eta + wts @ quad)


def dissipation_check(sys: CddsSystem, r: float, cert, J: SupplyRate, traj: Trajectory,
                      stride: int | None = None) -> dict:
    """Check ``v(t2) - v(t1) <= int_{t1}^{t2} s dt`` along a trajectory.

    Pairs are consecutive samples ``stride`` steps apart (default: one
    delay) plus the whole horizon.  Returns the worst residual and an
    energy scale to judge it against.
    """
    lo, hi = cert.interval
    if not lo - 1e-12 <= r <= hi + 1e-12:
        raise ValueError(f"delay {r} outside the certified interval {cert.interval}")
    s_sys = sys.at_degree(cert.d)
    basis = build_basis(s_sys.d)
    P, S, U = cert.P(r), cert.S(r), cert.U(r)
    stride = stride or traj.N
    idx = np.arange(0, traj.t.size, stride)
    v = np.array([functional_value(traj, int(k), P, S, U, basis) for k in idx])
    if J.m + J.q:
        J1, J2, J3 = J.matrices()
        s = np.einsum("ka,ab,kb->k", traj.z, J1, traj.z) + 2 * np.einsum("ka,ab,kb->k", traj.z, J2, traj.w) \
            + np.einsum("ka,ab,kb->k", traj.w, J3, traj.w)
    else:
        s = np.zeros(traj.t.size)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * traj.h * (s[1:] + s[:-1]))])
    supply = cum[idx]
    resid = np.diff(v) - np.diff(supply)
    whole = (v[-1] - v[0]) - (supply[-1] - supply[0])
    scale = max(float(np.max(np.abs(v))), float(np.max(np.abs(cum))), 1e-300)
    worst = float(max(np.max(resid, initial=-np.inf), whole))
    return {"worst_residual": worst, "energy_scale": scale, "relative": worst / scale,
            "v": v, "times": traj.t[idx], "supply": supply}


# -- frequency domain -------------------------------------------------------------


def _monomial_moments(p: int, r: float, s: complex) -> np.ndarray:
    m = np.zeros(p + 1, dtype=complex)
    if abs(s) * r >= max(p, 1):
        e = np.exp(-s * r)
        m[0] = (1.0 - e) / s
        for k in range(1, p + 1):
            m[k] = (-((-r) ** k) * e) / s - (k / s) * m[k - 1]
        return m
    # power series of exp(s tau) integrated term by term
    for k in range(p + 1):
        acc, term_coef, nn = 0.0 + 0.0j, 1.0 + 0.0j, 0
        while True:
            term = term_coef * (-1.0) ** (k + nn) * r ** (k + nn + 1) / (k + nn + 1)
            acc += term
            nn += 1
            term_coef *= s / nn
            if abs(term) <= 1e-18 * max(abs(acc), 1e-300) or nn > 400:
                break
        m[k] = acc
    return m


def kernel_moments(basis: LegendreBasis, r: float, omega: float) -> np.ndarray:
    """``mu_k = int_{-r}^0 exp(j omega tau) ell_k(tau) dtau`` for ``k = 0..d``."""
    if not r > 0:
        raise ValueError("delay must be positive")
    m = _monomial_moments(basis.d, r, 1j * float(omega))
    return basis.lambda_matrix @ (m / r ** np.arange(basis.size))


def freq_response(sys: CddsSystem, r: float, omega: float, basis: LegendreBasis | None = None) -> np.ndarray:
    """Transfer matrix ``H(j omega)`` from ``w`` to ``z`` (``m x q``).

    The caller is responsible for ``r`` being a stable delay; the formula is
    evaluated regardless.  Raises ``numpy.linalg.LinAlgError`` when the
    resolvent is singular.
    """
    basis = basis or build_basis(sys.d)
    nu, n = sys.nu, sys.n
    s = 1j * float(omega)
    ed = np.exp(-s * r)
    Mt = np.kron(kernel_moments(basis, r, omega)[:, None], np.eye(nu))
    Kx = np.linalg.solve(np.eye(nu) - sys.A5 * ed, sys.A4)
    A3 = sys.A3(r)
    C3 = sys.C3(r)
    res = s * np.eye(n) - sys.A1 - (sys.A2 * ed + A3 @ Mt) @ Kx
    xw = np.linalg.solve(res, sys.D1)
    return (sys.C1 + (sys.C2 * ed + C3 @ Mt) @ Kx) @ xw + sys.D2


@dataclass
class FrequencyResponse:
    omega: np.ndarray
    H: np.ndarray
    sigma: np.ndarray
    peak: float
    omega_peak: float

    def to_csv(self, path) -> None:
        write_csv(path, ["omega", "sigma_max"], [self.omega, self.sigma],
                  comment=f"peak {float(self.peak)!r} at omega {float(self.omega_peak)!r}")


def _sigma(sys, r, om, basis) -> float:
    H = freq_response(sys, r, om, basis)
    return float(np.linalg.svd(H, compute_uv=False)[0]) if H.size else 0.0


def sigma_sweep(sys: CddsSystem, r: float, omega_max: float = 1e3, npoints: int = 2000,
                omega_min: float = 1e-2) -> FrequencyResponse:
    """Peak of ``sigma_max(H(j omega))`` over ``{0} U [omega_min, omega_max]``.

    A logarithmic grid locates the peak, which is then refined by
    golden-section search on the bracketing grid points.
    """
    basis = build_basis(sys.d)
    om = np.concatenate([[0.0], np.logspace(np.log10(omega_min), np.log10(omega_max), npoints)])
    H = np.array([freq_response(sys, r, w, basis) for w in om])
    sig = np.array([np.linalg.svd(h, compute_uv=False)[0] if h.size else 0.0 for h in H])
    i = int(np.argmax(sig))
    peak, wpk = float(sig[i]), float(om[i])
    if 0 < i < om.size - 1:
        a, b = om[i - 1], om[i + 1]
        g = (np.sqrt(5.0) - 1) / 2
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = _sigma(sys, r, c, basis), _sigma(sys, r, d, basis)
        for _ in range(80):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = _sigma(sys, r, c, basis)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = _sigma(sys, r, d, basis)
            if b - a < 1e-12 * max(1.0, b):
                break
        for wv, fv in ((c, fc), (d, fd)):
            if fv > peak:
                peak, wpk = fv, wv
    return FrequencyResponse(om, H, sig, float(peak), float(wpk))


# -- integral inequality ------------------------------------------------------------


def bessel_check(basis: LegendreBasis, r: float, samples, U) -> tuple[float, float]:
    """Both sides of ``int y^T U y >= (1/r) [int L y]^T (D kron U) [int L y]``.

    ``samples`` holds ``y`` at an odd number of equally spaced points
    spanning ``[-r, 0]`` (shape ``(npts, nu)`` or ``(npts,)``).
    """
    y = np.asarray(samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    U = np.atleast_2d(np.asarray(U, dtype=float))
    npts = y.shape[0]
    tau = np.linspace(-r, 0.0, npts)
    wts = simpson_weights(npts, r / (npts - 1))
    lhs = float(wts @ np.einsum("ja,ab,jb->j", y, U, y))
    proj = np.einsum("ij,j,jb->ib", eval_basis(basis, r, tau), wts, y).reshape(-1)
    rhs = float(proj @ np.kron(basis.weight, U) @ proj) / r
    return lhs, rhs
