"""Delay-range stability / dissipativity analyses built on the SoS relaxation.

* :func:`check_range` certifies a whole delay interval.
* :func:`check_pointwise` certifies a single delay with constant matrices.
* :func:`minimize_gamma` finds the smallest certifiable L2 gain.
* :func:`estimate_margin` bisects on one end of a certified interval.
* :func:`hierarchy_sweep` runs a list of basis degrees and checks that each
  certificate lifts to the next degree by zero padding.

A ``certified`` verdict always comes with a :class:`Certificate` that was
re-checked on a dense delay grid independently of the solver's status.
``unknown`` never means unstable: the conditions are only sufficient.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .builder import (DecisionLayout, FunctionalDegrees, FunctionalVariables, allocate_functional,
                      build_pi, build_theta)
from .legendre import build_basis
from .model import CddsSystem, DelayRange, SupplyRate, l2_gain_supply, validate
from .polymatrix import AffinePolyMatrix, GramCertificate, PolyMatrix, gram_expand
from .relax import ConstraintSet, RelaxationPlan, assemble, constraint_on_interval
from .sdp import EPS_STRICT, SdpProblem, solve, solve_strict

__all__ = [
    "Certificate",
    "AnalysisReport",
    "check_range",
    "check_pointwise",
    "minimize_gamma",
    "estimate_margin",
    "hierarchy_sweep",
    "padding_check",
    "build_sdp",
    "GAMMA_SLACKS",
]

GRID_POINTS = 200
GRID_TOL = 1e-7
GAMMA_SLACKS = (1e-4, 1e-3, 1e-2)


@dataclass
class Certificate:
    """Numeric functional plus the evidence that it satisfies every condition.

    ``grid`` maps each condition (``Pi``, ``-Theta``, ``S``, ``U``) to
    ``(min eigenvalue over the grid, tolerance)``; ``grams`` maps each
    relaxed constraint to its Gram and multiplier Gram matrices.
    """

    d: int
    deg: FunctionalDegrees
    interval: tuple
    supply: SupplyRate
    P: PolyMatrix
    S: PolyMatrix
    U: PolyMatrix
    grams: dict
    grid: dict
    margin: float
    gram_min_eig: dict = field(default_factory=dict)

    @property
    def grid_ok(self) -> bool:
        return all(v >= -tol for v, tol in self.grid.values())

    @property
    def pointwise(self) -> bool:
        return self.interval[0] == self.interval[1]


@dataclass
class AnalysisReport:
    verdict: str
    gamma: float | None = None
    gamma_lower: float | None = None
    margin: float | None = None
    seconds: float = 0.0
    sdp: dict = field(default_factory=dict)
    certificate: Certificate | None = None
    message: str = ""
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def summary(self) -> dict:
        out = {"verdict": self.verdict, "seconds": round(self.seconds, 3), "message": self.message}
        for k in ("gamma", "gamma_lower", "margin"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        out["sdp"] = self.sdp
        if self.certificate is not None:
            out["grid_min_eig"] = {k: v[0] for k, v in self.certificate.grid.items()}
            out["strict_margin"] = self.certificate.margin
        out.update(self.details)
        return out


@dataclass
class _Formulation:
    sys: CddsSystem
    layout: DecisionLayout
    fv: FunctionalVariables
    Pi: AffinePolyMatrix
    Theta: AffinePolyMatrix
    cs: ConstraintSet
    interval: tuple


def _formulate(sys: CddsSystem, deg: FunctionalDegrees, plan: RelaxationPlan, J: SupplyRate,
               rng: DelayRange | None, r0: float | None) -> _Formulation:
    validate(sys)
    if J.m != sys.m or J.q != sys.q:
        raise ValueError(f"supply is {J.m}x{J.q}, system has m={sys.m}, q={sys.q}")
    basis = build_basis(sys.d)
    layout = DecisionLayout()
    fv = allocate_functional(layout, sys, deg, gamma_free=J.gamma_variable)
    Pi = build_pi(sys, fv, basis)
    Theta = build_theta(sys, fv, J, basis)
    cs = ConstraintSet()
    v = plan.vertex
    cs.extend(constraint_on_interval(Pi, +1, rng, r0, layout, plan.pi, v, "Pi"))
    cs.extend(constraint_on_interval(fv.S, +1, rng, r0, layout, plan.s, v, "S"))
    cs.extend(constraint_on_interval(fv.U, +1, rng, r0, layout, plan.u, v, "U"))
    cs.extend(constraint_on_interval(Theta, -1, rng, r0, layout, plan.theta, v, "Theta"))
    interval = (rng.r1, rng.r2) if rng is not None else (float(r0), float(r0))
    return _Formulation(sys, layout, fv, Pi, Theta, cs, interval)


def _grid(interval) -> np.ndarray:
    a, b = interval
    if a == b:
        return np.array([a])
    return np.unique(np.concatenate([[a, b], np.linspace(a, b, GRID_POINTS)]))


def _min_eig_on_grid(F: PolyMatrix, grid, sign: int) -> tuple[float, float]:
    worst, scale = np.inf, 0.0
    for r in grid:
        M = sign * F(r)
        M = 0.5 * (M + M.T)
        if M.size == 0:
            continue
        ev = np.linalg.eigvalsh(M)
        worst = min(worst, float(ev[0]))
        scale = max(scale, float(np.max(np.abs(ev))))
    return worst, GRID_TOL * (1.0 + scale)


def _sos_slack(rec, f: _Formulation, x, Q, Qm, grid) -> float:
    """Worst ``lambda_min(Q) |m(r)|^2 - |R(r)|`` over the grid.

    ``R`` is the coefficient-matching residual left by floating point; a
    positive value proves the relaxed polynomial is positive definite at
    every grid point regardless of the solver's tolerances.
    """
    m = rec.F.rows
    G = rec.sign * rec.F.value(x)
    lo, hi = rec.points
    mult = gram_expand(GramCertificate(m, rec.mult_half_degree, Qm))
    target = (G + mult.poly_scale([lo * hi, -(lo + hi), 1.0])).coeffs
    expanded = gram_expand(GramCertificate(m, rec.half_degree, Q)).coeffs
    n = max(target.shape[0], expanded.shape[0])
    resid = np.zeros((n, m, m))
    resid[: target.shape[0]] += target
    resid[: expanded.shape[0]] -= expanded
    norms = np.array([np.linalg.norm(c, 2) for c in resid])
    lam = float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0])
    worst = np.inf
    for r in grid:
        mono = float(np.sum(r ** (2 * np.arange(rec.half_degree + 1))))
        worst = min(worst, lam * mono - float(norms @ np.abs(r) ** np.arange(n)))
    return worst


def _certificate(f: _Formulation, x: np.ndarray, J: SupplyRate, deg: FunctionalDegrees,
                 margin: float, block_margins: dict) -> Certificate:
    grid = _grid(f.interval)
    checks = {
        "Pi": _min_eig_on_grid(f.Pi.value(x), grid, +1),
        "-Theta": _min_eig_on_grid(f.Theta.value(x), grid, -1),
        "S": _min_eig_on_grid(f.fv.S.value(x), grid, +1),
        "U": _min_eig_on_grid(f.fv.U.value(x), grid, +1),
    }
    grams = {}
    for rec in f.cs.records:
        if rec.path == "sos":
            Q, Qm = x[rec.gram_index], x[rec.mult_index]
            grams[rec.tag] = (Q, Qm)
            checks[f"sos:{rec.tag}"] = (_sos_slack(rec, f, x, Q, Qm, grid), 0.0)
    return Certificate(d=f.sys.d, deg=deg, interval=f.interval, supply=J,
                       P=f.fv.P.value(x), S=f.fv.S.value(x), U=f.fv.U.value(x),
                       grams=grams, grid=checks, margin=margin, gram_min_eig=block_margins)


def _run_strict(f: _Formulation, J: SupplyRate, deg: FunctionalDegrees, t0: float,
                eps: float = EPS_STRICT) -> AnalysisReport:
    prob = assemble(f.cs, f.layout)
    res = solve_strict(prob, eps=eps)
    stats = dict(prob.stats(), status=res.solution.status, iterations=res.solution.iterations,
                 solver_seconds=round(res.solution.seconds, 3), strict_margin=res.margin,
                 strict_status=res.status)
    if not res.feasible:
        return AnalysisReport("unknown", seconds=time.perf_counter() - t0, sdp=stats,
                              message=f"no certificate ({res.status}, margin {res.margin:.3g})")
    cert = _certificate(f, res.x, J, deg, res.margin, res.block_margins)
    if not cert.grid_ok:
        return AnalysisReport("unknown", seconds=time.perf_counter() - t0, sdp=stats, certificate=cert,
                              message="solver point failed grid re-validation")
    return AnalysisReport("certified", gamma=J.gamma if J.mode == "l2gain" else None,
                          seconds=time.perf_counter() - t0, sdp=stats, certificate=cert)


def _lift(sys: CddsSystem, d: int | None) -> CddsSystem:
    return sys if d is None else sys.at_degree(d)


def build_sdp(sys: CddsSystem, where, deg: FunctionalDegrees = FunctionalDegrees(),
              plan: RelaxationPlan = RelaxationPlan(), J: SupplyRate | None = None,
              d: int | None = None) -> SdpProblem:
    """The assembled (non-homogenized) SDP for a range or a single delay.

    ``J=None`` gives the pure stability problem; a supply with a free gain
    gives the gain-minimization problem with objective ``gamma``.
    """
    sys = _lift(sys, d)
    if J is None:
        sys = sys.without_io()
        J = SupplyRate(0, 0, "passivity")
    pointwise = not isinstance(where, DelayRange)
    rng, r0 = (None, float(where)) if pointwise else (where, None)
    if pointwise:
        deg = FunctionalDegrees()
    f = _formulate(sys, deg, plan, J, rng, r0)
    c = np.zeros(f.layout.nvars)
    if f.fv.gamma is not None:
        c[f.fv.gamma] = 1.0
    return assemble(f.cs, f.layout, c)


def check_range(sys: CddsSystem, rng: DelayRange, deg: FunctionalDegrees = FunctionalDegrees(),
                plan: RelaxationPlan = RelaxationPlan(), J: SupplyRate | None = None,
                d: int | None = None) -> AnalysisReport:
    """Certify stability and dissipativity for every delay in ``rng``.

    ``J=None`` means pure stability: disturbance and output channels are
    dropped and the zero supply is used.
    """
    t0 = time.perf_counter()
    sys = _lift(sys, d)
    if J is None:
        sys = sys.without_io()
        J = SupplyRate(0, 0, "passivity")
    if J.gamma_variable:
        raise ValueError("check_range needs a fixed supply; use minimize_gamma")
    f = _formulate(sys, deg, plan, J, rng, None)
    return _run_strict(f, J, deg, t0)


def check_pointwise(sys: CddsSystem, r0: float, plan: RelaxationPlan = RelaxationPlan(),
                    J: SupplyRate | None = None, d: int | None = None) -> AnalysisReport:
    """Certify a single delay ``r0`` with constant ``P``, ``S``, ``U``."""
    t0 = time.perf_counter()
    if not r0 > 0:
        raise ValueError(f"delay must be positive, got {r0}")
    sys = _lift(sys, d)
    if J is None:
        sys = sys.without_io()
        J = SupplyRate(0, 0, "passivity")
    deg = FunctionalDegrees()
    f = _formulate(sys, deg, plan, J, None, r0)
    return _run_strict(f, J, deg, t0)


def minimize_gamma(sys: CddsSystem, where, deg: FunctionalDegrees = FunctionalDegrees(),
                   plan: RelaxationPlan = RelaxationPlan(), d: int | None = None,
                   slacks=GAMMA_SLACKS) -> AnalysisReport:
    """Smallest certifiable L2 gain over a range (``DelayRange``) or at a point (float).

    The gain enters affinely, so one SDP gives the infimum ``gamma_lower``;
    the reported ``gamma`` is the smallest ``gamma_lower * (1 + slack)``
    over ``slacks`` that passes strict certification.
    """
    t0 = time.perf_counter()
    sys = _lift(sys, d)
    if sys.m < 1 or sys.q < 1:
        raise ValueError("gain minimization needs at least one output and one disturbance")
    pointwise = not isinstance(where, DelayRange)
    rng, r0 = (None, float(where)) if pointwise else (where, None)
    if pointwise:
        deg = FunctionalDegrees()
    Jv = l2_gain_supply(None, sys.m, sys.q)
    f = _formulate(sys, deg, plan, Jv, rng, r0)
    c = np.zeros(f.layout.nvars)
    c[f.fv.gamma] = 1.0
    prob = assemble(f.cs, f.layout, c)
    sol = solve(prob)
    stats = dict(prob.stats(), status=sol.status, iterations=sol.iterations,
                 solver_seconds=round(sol.seconds, 3))
    if sol.x is None or sol.status not in ("optimal", "marginal"):
        return AnalysisReport("unknown", seconds=time.perf_counter() - t0, sdp=stats,
                              message=f"gain minimization failed: {sol.status} {sol.message}")
    g_inf = float(sol.x[f.fv.gamma])
    tried = []
    for s in slacks:
        gc = g_inf * (1.0 + s)
        J = l2_gain_supply(gc, sys.m, sys.q)
        fc = _formulate(sys, deg, plan, J, rng, r0)
        rep = _run_strict(fc, J, deg, t0)
        tried.append((s, rep.verdict))
        if rep.certified:
            rep.gamma_lower = g_inf
            rep.sdp = dict(rep.sdp, gamma_solve=stats)
            rep.details["slack"] = s
            return rep
    return AnalysisReport("unknown", gamma_lower=g_inf, seconds=time.perf_counter() - t0, sdp=stats,
                          message=f"infimum {g_inf:.6g} found but no slack in {list(slacks)} certified",
                          details={"slacks_tried": tried})


def estimate_margin(sys: CddsSystem, r0: float, direction: str, J: SupplyRate | None = None,
                    deg: FunctionalDegrees = FunctionalDegrees(), plan: RelaxationPlan = RelaxationPlan(),
                    tol: float = 1e-3, budget: int = 40, limit: float | None = None,
                    d: int | None = None) -> AnalysisReport:
    """Bisect for the farthest ``rho`` such that ``[rho, r0]`` (or ``[r0, rho]``) is certified.

    ``limit`` bounds the search: default ``0`` downwards and ``4 r0``
    upwards.  Every accepted probe is itself a range certificate, so the
    result is sound even if the feasible set is not an interval.
    """
    t0 = time.perf_counter()
    if direction not in ("down", "up"):
        raise ValueError("direction must be 'down' or 'up'")
    sys = _lift(sys, d)
    if limit is None:
        limit = 0.0 if direction == "down" else 4.0 * r0
    if (direction == "down" and not 0 <= limit < r0) or (direction == "up" and not limit > r0):
        raise ValueError(f"limit {limit} is on the wrong side of r0 = {r0}")
    start = check_pointwise(sys, r0, plan, J)
    if not start.certified:
        return AnalysisReport("unknown", seconds=time.perf_counter() - t0,
                              message=f"no certificate at r0 = {r0}", details={"probes": []})
    good, bad = float(r0), float(limit)
    best = start
    probes = []
    for _ in range(budget):
        if abs(good - bad) <= tol:
            break
        mid = 0.5 * (good + bad)
        rng = DelayRange(mid, r0) if direction == "down" else DelayRange(r0, mid)
        rep = check_range(sys, rng, deg, plan, J)
        probes.append((mid, rep.verdict))
        if rep.certified:
            good, best = mid, rep
        else:
            bad = mid
    interval = (good, r0) if direction == "down" else (r0, good)
    return AnalysisReport("certified", gamma=best.gamma, margin=good, seconds=time.perf_counter() - t0,
                          sdp=best.sdp, certificate=best.certificate,
                          details={"direction": direction, "interval": interval, "probes": probes,
                                   "bracket": (min(good, bad), max(good, bad))})


# -- hierarchy ----------------------------------------------------------------


def _fixed(pm: PolyMatrix) -> AffinePolyMatrix:
    return AffinePolyMatrix(pm)


def padding_check(sys: CddsSystem, cert: Certificate) -> dict:
    """Lift a degree-``d`` certificate to ``d+1`` with ``P_{d+1} = P_d (+) 0`` and re-validate.

    Checks on the grid that ``Theta_{d+1} = Theta_d (+) (-r (2d+3) U)`` and
    ``Pi_{d+1} = Pi_d (+) (2d+3) S`` hold exactly, and that the lifted
    matrices keep their definiteness.
    """
    d = cert.d
    s0 = sys.at_degree(d)
    s1 = sys.at_degree(d + 1)
    nu = sys.nu
    P = cert.P.coeffs
    P1 = np.zeros((P.shape[0], P.shape[1] + nu, P.shape[2] + nu))
    P1[:, : P.shape[1], : P.shape[2]] = P
    fv0 = FunctionalVariables(cert.deg, _fixed(cert.P), _fixed(cert.S), _fixed(cert.U))
    fv1 = FunctionalVariables(cert.deg, _fixed(PolyMatrix(P1)), _fixed(cert.S), _fixed(cert.U))
    J = cert.supply
    b0, b1 = build_basis(d), build_basis(d + 1)
    th0 = build_theta(s0, fv0, J, b0).value(np.zeros(0))
    th1 = build_theta(s1, fv1, J, b1).value(np.zeros(0))
    pi0 = build_pi(s0, fv0, b0).value(np.zeros(0))
    pi1 = build_pi(s1, fv1, b1).value(np.zeros(0))
    w = 2 * d + 3
    ident_err, pi_min, th_max, pi_round = 0.0, np.inf, -np.inf, 0.0
    for r in _grid(cert.interval):
        U, S = cert.U(r), cert.S(r)
        T0, T1 = th0(r), th1(r)
        expect = np.block([[T0, np.zeros((T0.shape[0], nu))], [np.zeros((nu, T0.shape[0])), -r * w * U]])
        Q0, Q1 = pi0(r), pi1(r)
        expect_pi = np.block([[Q0, np.zeros((Q0.shape[0], nu))], [np.zeros((nu, Q0.shape[0])), w * S]])
        scale = 1.0 + np.max(np.abs(expect)) + np.max(np.abs(expect_pi))
        ident_err = max(ident_err, np.max(np.abs(T1 - expect)) / scale, np.max(np.abs(Q1 - expect_pi)) / scale)
        ev = np.linalg.eigvalsh(0.5 * (Q1 + Q1.T))
        pi_min = min(pi_min, float(ev[0]))
        # backward-error bound of the symmetric eigensolver on this block
        pi_round = max(pi_round, Q1.shape[0] * np.finfo(float).eps * float(np.max(np.abs(ev))))
        th_max = max(th_max, float(np.linalg.eigvalsh(0.5 * (T1 + T1.T))[-1]))
    return {"d": d + 1, "identity_error": float(ident_err), "pi_min_eig": pi_min,
            "theta_max_eig": th_max, "pi_roundoff": pi_round,
            "certified_pi_min": cert.grid["Pi"][0], "certified_theta_max": -cert.grid["-Theta"][0],
            "passed": bool(ident_err <= 1e-12 and pi_min > 0 and th_max < 0)}


def hierarchy_sweep(sys: CddsSystem, where, d_list, deg: FunctionalDegrees = FunctionalDegrees(),
                    plan: RelaxationPlan = RelaxationPlan(), J: SupplyRate | None = None,
                    minimize: bool = False) -> list[dict]:
    """Run one analysis per basis degree; certified rows carry a padding check.

    With ``minimize=True`` each row holds the minimal gain; otherwise the
    supply ``J`` (or pure stability) is checked on the range.
    """
    d_list = list(d_list)
    if d_list != sorted(d_list):
        raise ValueError("degrees must be ascending")
    rows = []
    for d in d_list:
        if minimize:
            rep = minimize_gamma(sys, where, deg, plan, d=d)
        elif isinstance(where, DelayRange):
            rep = check_range(sys, where, deg, plan, J, d=d)
        else:
            rep = check_pointwise(sys, float(where), plan, J, d=d)
        row = {"d": d, "verdict": rep.verdict, "gamma": rep.gamma, "gamma_lower": rep.gamma_lower,
               "seconds": rep.seconds, "report": rep}
        if rep.certified:
            base = sys if J is not None or minimize else sys.without_io()
            row["padding"] = padding_check(base, rep.certificate)
        rows.append(row)
    return rows
