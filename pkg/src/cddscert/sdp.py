"""Semidefinite programs with linear matrix inequality blocks.

Problem form::

    minimize    c^T x
    subject to  B_k(x) = B_k0 + sum_i x_i B_ki  >= 0   (PSD, k = 1..K)
                E x = h

Equalities are eliminated up front (``x = x0 + N z`` from a rank-revealing
QR factorization), the remaining block data is orthonormalized, and the
reduced conic program is handed to the primal-dual interior-point solver
of ``cvxopt``.  :func:`solve_strict` wraps this in a homogenized
maximum-margin program that decides strict feasibility.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "StrictResult",
    "solve",
    "solve_strict",
    "margin_problem",
    "export_sdpa",
    "parse_sdpa",
    "EPS_STRICT",
]

EPS_STRICT = 1e-9
_RANK_TOL = 1e-11
QR_FALLBACK_MAX = 1200


@dataclass
class LmiBlock:
    """``constant + mat(coeff @ x) >= 0``.

    ``coeff`` has one column per decision variable holding the row-major
    (equivalently column-major, by symmetry) vectorization of ``B_ki``.
    """

    name: str
    constant: np.ndarray
    coeff: sp.csc_matrix
    strict: bool = True

    def __post_init__(self):
        self.constant = np.atleast_2d(np.asarray(self.constant, dtype=float))
        self.coeff = sp.csc_matrix(self.coeff)
        d = self.constant.shape[0]
        if self.constant.shape != (d, d) or self.coeff.shape[0] != d * d:
            raise ValueError(f"block {self.name}: inconsistent dimensions")

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def value(self, x) -> np.ndarray:
        M = self.constant + (self.coeff @ np.asarray(x, dtype=float)).reshape(self.dim, self.dim)
        return 0.5 * (M + M.T)

    def min_eig(self, x) -> float:
        return float(np.linalg.eigvalsh(self.value(x))[0])

    @classmethod
    def from_dense_terms(cls, name: str, constant, var_ids, terms, nvars: int, strict: bool = True):
        """Build from ``(nv, dim, dim)`` dense term matrices for the given variable ids."""
        terms = np.asarray(terms, dtype=float)
        dim = np.asarray(constant).shape[0]
        flat = terms.reshape(terms.shape[0], dim * dim).T
        r, c = np.nonzero(flat)
        mat = sp.csc_matrix((flat[r, c], (r, np.asarray(var_ids)[c])), shape=(dim * dim, nvars))
        return cls(name, constant, mat, strict)


@dataclass
class SdpProblem:
    nvars: int
    c: np.ndarray
    blocks: list
    eq_matrix: sp.csr_matrix = None
    eq_rhs: np.ndarray = None

    def __post_init__(self):
        self.c = np.zeros(self.nvars) if self.c is None else np.asarray(self.c, dtype=float)
        if self.eq_matrix is None:
            self.eq_matrix = sp.csr_matrix((0, self.nvars))
            self.eq_rhs = np.zeros(0)
        self.eq_matrix = sp.csr_matrix(self.eq_matrix)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        for b in self.blocks:
            if b.coeff.shape[1] != self.nvars:
                raise ValueError(f"block {b.name} has {b.coeff.shape[1]} columns, expected {self.nvars}")

    @property
    def n_equalities(self) -> int:
        return self.eq_matrix.shape[0]

    def stats(self) -> dict:
        return {"nvars": self.nvars, "n_blocks": len(self.blocks),
                "block_dims": [b.dim for b in self.blocks], "n_equalities": self.n_equalities}


@dataclass
class SdpSolution:
    """Outcome of :func:`solve`.

    ``status`` is ``optimal``, ``infeasible``, ``marginal`` (solver stopped
    without meeting its tolerances) or ``error``.
    """

    status: str
    x: np.ndarray | None
    primal_objective: float = np.nan
    dual_objective: float = np.nan
    gap: float = np.nan
    relative_gap: float = np.nan
    iterations: int = 0
    block_min_eig: list = field(default_factory=list)
    eq_residual: float = np.nan
    reduced_nvars: int = 0
    seconds: float = 0.0
    message: str = ""


def _reduce_equalities(p: SdpProblem, tol: float):
    """Return ``(x0, N)`` with ``{x : E x = h} = {x0 + N z}``, or ``None`` if inconsistent."""
    n = p.nvars
    if p.n_equalities == 0:
        return np.zeros(n), np.eye(n), 0.0
    E = p.eq_matrix.toarray()
    h = p.eq_rhs
    Q, R, piv = sla.qr(E.T, pivoting=True)
    diag = np.abs(np.diag(R))
    k = int(np.sum(diag > tol * max(diag[0] if diag.size else 0.0, 1.0)))
    R11 = R[:k, :k]
    y = sla.solve_triangular(R11, h[piv[:k]], trans="T")
    x0 = Q[:, :k] @ y
    resid = float(np.max(np.abs(E @ x0 - h), initial=0.0))
    scale = 1.0 + float(np.max(np.abs(h), initial=0.0))
    if resid > 1e-8 * scale:
        return None
    return x0, Q[:, k:], resid


def _better(a: dict, b: dict) -> bool:
    # compare stalled runs by their residuals
    def score(r):
        vals = [r.get("primal infeasibility"), r.get("dual infeasibility"), r.get("relative gap")]
        return max(abs(v) if v is not None else np.inf for v in vals)
    return score(a) < score(b)


def solve(p: SdpProblem, tol: float = 1e-9, max_iter: int = 200) -> SdpSolution:
    """Solve the SDP with ``cvxopt``'s conic interior-point method."""
    import cvxopt
    from cvxopt import solvers

    t0 = time.perf_counter()
    red = _reduce_equalities(p, _RANK_TOL)
    if red is None:
        return SdpSolution("infeasible", None, message="inconsistent equality constraints",
                           seconds=time.perf_counter() - t0)
    x0, N, eq_res = red
    nz = N.shape[1]
    # reduced data per block: value = H_k + G_k z
    lin_rows, lin_h, sdp_G, sdp_h, dims = [], [], [], [], []
    for b in p.blocks:
        Hk = b.constant + (b.coeff @ x0).reshape(b.dim, b.dim)
        Hk = 0.5 * (Hk + Hk.T)
        Gk = np.asarray(b.coeff @ N) if nz else np.zeros((b.dim * b.dim, 0))
        if b.dim == 1:
            lin_rows.append(Gk)
            lin_h.append(Hk.reshape(1))
        else:
            sdp_G.append(Gk)
            sdp_h.append(Hk)
            dims.append(b.dim)
    Gall = np.vstack(lin_rows + sdp_G) if (lin_rows or sdp_G) else np.zeros((0, nz))
    cz = N.T @ p.c

    def finish(status, x, **kw):
        sol = SdpSolution(status, x, seconds=time.perf_counter() - t0, eq_residual=eq_res, **kw)
        if x is not None:
            sol.block_min_eig = [b.min_eig(x) for b in p.blocks]
            sol.eq_residual = float(np.max(np.abs(p.eq_matrix @ x - p.eq_rhs), initial=0.0))
        return sol

    if nz == 0 or Gall.shape[0] == 0 or not np.any(Gall):
        eigs = [np.linalg.eigvalsh(h)[0] for h in sdp_h] + [float(v[0]) for v in lin_h]
        ok = all(e >= -tol for e in eigs)
        if np.any(np.abs(cz) > 0) and nz:
            return finish("error", None, message="objective unbounded along a free direction")
        return finish("optimal" if ok else "infeasible", x0, primal_objective=float(p.c @ x0))
    # orthonormalize the columns acting on the blocks; free directions drop out
    Qg, Rg, pg = sla.qr(Gall, mode="economic", pivoting=True)
    dg = np.abs(np.diag(Rg))
    k = int(np.sum(dg > _RANK_TOL * dg[0]))
    Rk = Rg[:k]
    # c^T z = c'^T (Rk z_perm) must hold for every z
    cw, *_ = np.linalg.lstsq(Rk.T, cz[pg], rcond=None)
    if np.linalg.norm(Rk.T @ cw - cz[pg]) > 1e-9 * (1.0 + np.linalg.norm(cz)):
        return finish("error", None, message="objective unbounded along a free direction")
    Qk = Qg[:, :k]
    nl = len(lin_rows)
    G = cvxopt.matrix(-Qk)
    c = cvxopt.matrix(cw)
    kw = {}
    if nl:
        kw["Gl"] = G[:nl, :]
        kw["hl"] = cvxopt.matrix(np.concatenate(lin_h))
    if dims:
        Gs, hs, row = [], [], nl
        for d, h in zip(dims, sdp_h):
            Gs.append(G[row: row + d * d, :])
            hs.append(cvxopt.matrix(h))
            row += d * d
        kw["Gs"] = Gs
        kw["hs"] = hs
    opts = {"show_progress": False, "maxiters": max_iter, "abstol": tol, "reltol": tol,
            "feastol": tol, "refinement": 1}
    # Cholesky on the normal equations is fast; the QR path is slower but
    # stays accurate closer to singular optima, so it backs up stalled runs.
    order = ["chol", "qr"] if k <= QR_FALLBACK_MAX else ["chol"]
    res, err = None, ""
    for kkt in order:
        try:
            trial = solvers.sdp(c, kktsolver=kkt, options=opts, **kw)
        except (ValueError, ArithmeticError) as exc:
            err = f"solver failure: {exc}"
            continue
        if res is None or trial["status"] == "optimal" or _better(trial, res):
            res = trial
        if res["status"] in ("optimal", "primal infeasible", "dual infeasible"):
            break
    if res is None:
        return finish("error", None, message=err)
    status = {"optimal": "optimal", "primal infeasible": "infeasible",
              "dual infeasible": "error", "unknown": "marginal"}[res["status"]]
    def num(key):
        v = res.get(key)
        return np.nan if v is None else float(v)

    info = dict(primal_objective=num("primal objective") + float(p.c @ x0),
                dual_objective=num("dual objective") + float(p.c @ x0),
                gap=num("gap"), relative_gap=num("relative gap"),
                iterations=int(res.get("iterations", 0)), reduced_nvars=k)
    if status == "infeasible":
        return finish(status, None, message="primal infeasibility certificate", **info)
    if status == "error":
        return finish(status, None, message="dual infeasible (unbounded objective)", **info)
    w = np.asarray(res["x"]).reshape(-1)
    zp = np.zeros(nz)
    zp[:k] = sla.solve_triangular(Rk[:, :k], w)
    z = np.zeros(nz)
    z[pg] = zp
    x = x0 + N @ z
    return finish(status, x, **info)


# -- strict feasibility ---------------------------------------------------------


def margin_problem(p: SdpProblem) -> tuple[SdpProblem, int, int]:
    """Homogenized maximum-margin program.

    Variables ``(x, kappa, t)``; each strict block becomes
    ``kappa B_k0 + sum x_i B_ki - t I >= 0``, equalities become
    ``E x - h kappa = 0``, and ``kappa >= t``, ``t >= -1`` plus the trace
    bound ``sum_k tr(kappa B_k0 + ...) + kappa <= sum_k dim_k + 1`` keep the
    program bounded.  Maximizing ``t`` gives ``t > 0`` iff the original
    system of strict inequalities is feasible.
    """
    n = p.nvars
    K, T = n, n + 1
    nv = n + 2
    blocks = []
    trace_row = np.zeros(nv)
    ntot = 1.0
    for b in p.blocks:
        d = b.dim
        cols = [b.coeff, sp.csc_matrix(b.constant.reshape(-1, 1))]
        tcol = -np.eye(d).reshape(-1, 1) if b.strict else np.zeros((d * d, 1))
        cols.append(sp.csc_matrix(tcol))
        coeff = sp.hstack(cols, format="csc")
        blocks.append(LmiBlock(b.name, np.zeros((d, d)), coeff, b.strict))
        if b.strict:
            diag_idx = np.arange(d) * (d + 1)
            trace_row[:n] += np.asarray(b.coeff[diag_idx, :].sum(axis=0)).reshape(-1)
            trace_row[K] += np.trace(b.constant)
            ntot += d
    trace_row[K] += 1.0
    blocks.append(LmiBlock("kappa", np.zeros((1, 1)), sp.csc_matrix(([1.0, -1.0], ([0, 0], [K, T])), shape=(1, nv))))
    blocks.append(LmiBlock("trace", np.array([[ntot]]), sp.csc_matrix(-trace_row.reshape(1, -1)), strict=False))
    blocks.append(LmiBlock("t_lower", np.array([[1.0]]), sp.csc_matrix(([1.0], ([0], [T])), shape=(1, nv)), strict=False))
    E = sp.hstack([p.eq_matrix, sp.csr_matrix(-p.eq_rhs.reshape(-1, 1)), sp.csr_matrix((p.n_equalities, 1))], format="csr")
    c = np.zeros(nv)
    c[T] = -1.0
    return SdpProblem(nv, c, blocks, E, np.zeros(p.n_equalities)), K, T


@dataclass
class StrictResult:
    """Strict-feasibility verdict.

    ``status`` is ``feasible`` when every strict block of the recovered
    point clears ``eps (1 + trace / dim)`` (the mean eigenvalue) in the
    normalized scaling, ``infeasible``
    when the optimal margin is not positive, ``marginal`` when it is positive
    but too small to certify, and ``error`` on solver failure.
    """

    status: str
    x: np.ndarray | None
    margin: float
    kappa: float
    block_margins: dict
    solution: SdpSolution
    eps: float = EPS_STRICT

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def solve_strict(p: SdpProblem, eps: float = EPS_STRICT, tol: float = 1e-10,
                 max_iter: int = 200) -> StrictResult:
    """Decide ``B_k(x) > 0`` for all strict blocks (and ``E x = h``)."""
    mp, K, T = margin_problem(p)
    sol = solve(mp, tol=tol, max_iter=max_iter)
    if sol.x is None:
        st = "infeasible" if sol.status == "infeasible" else "error"
        return StrictResult(st, None, -np.inf, 0.0, {}, sol, eps)
    xh = sol.x
    kappa, t = float(xh[K]), float(xh[T])
    margins = {}
    ok = kappa > eps
    for b, bm in zip(p.blocks, mp.blocks):
        if not b.strict:
            continue
        M = bm.value(xh)
        lam = float(np.linalg.eigvalsh(M + t * np.eye(b.dim))[0])  # undo the -tI shift
        thr = eps * (1.0 + abs(np.trace(M + t * np.eye(b.dim))) / b.dim)
        margins[b.name] = lam
        ok = ok and lam > thr
    if kappa > 0:
        x = xh[: p.nvars] / kappa
        eqr = float(np.max(np.abs(p.eq_matrix @ x - p.eq_rhs), initial=0.0))
        ok = ok and eqr <= 1e-7 * (1.0 + float(np.max(np.abs(p.eq_rhs), initial=0.0)))
    else:
        x = None
    if ok:
        status = "feasible"
    elif t <= eps:
        status = "infeasible" if sol.status == "optimal" else "marginal"
    else:
        status = "marginal"
    return StrictResult(status, x, t, kappa, margins, sol, eps)


# -- SDPA sparse format ---------------------------------------------------------


def export_sdpa(p: SdpProblem, path_or_buf) -> None:
    """Write the problem in SDPA sparse format.

    SDPA solves ``min c^T x`` subject to ``sum_i x_i F_i - F_0 >= 0``, so
    ``F_0 = -B_0`` and ``F_i = B_i``.  Equalities ``E x = h`` are appended as
    one diagonal block holding ``E x - h >= 0`` and ``h - E x >= 0``.
    """
    lines = ['"SDP exported by cddscert"',
             '"blocks: one per LMI, last diagonal block (negative size) encodes E x = h as two inequalities"']
    nb = len(p.blocks) + (1 if p.n_equalities else 0)
    struct = [b.dim for b in p.blocks] + ([-2 * p.n_equalities] if p.n_equalities else [])
    lines.append(str(p.nvars))
    lines.append(str(nb))
    lines.append(" ".join(str(s) for s in struct))
    lines.append(" ".join(f"{v:.17g}" for v in p.c))
    entries = []
    for k, b in enumerate(p.blocks, start=1):
        d = b.dim
        iu, ju = np.triu_indices(d)
        for i, j in zip(iu, ju):
            v = -b.constant[i, j]
            if v != 0:
                entries.append((0, k, i + 1, j + 1, v))
        coo = b.coeff.tocoo()
        for row, var, val in zip(coo.row, coo.col, coo.data):
            i, j = divmod(int(row), d)
            if i <= j and val != 0:
                entries.append((int(var) + 1, k, i + 1, j + 1, float(val)))
    if p.n_equalities:
        k = nb
        me = p.n_equalities
        for i, h in enumerate(p.eq_rhs):
            if h != 0:
                entries.append((0, k, i + 1, i + 1, float(h)))
                entries.append((0, k, me + i + 1, me + i + 1, -float(h)))
        coo = p.eq_matrix.tocoo()
        for i, var, val in zip(coo.row, coo.col, coo.data):
            if val != 0:
                entries.append((int(var) + 1, k, int(i) + 1, int(i) + 1, float(val)))
                entries.append((int(var) + 1, k, me + int(i) + 1, me + int(i) + 1, -float(val)))
    # duplicates (same var, same position) are summed so every entry is unique
    acc: dict = {}
    for m, k, i, j, v in entries:
        acc[(m, k, i, j)] = acc.get((m, k, i, j), 0.0) + v
    for key in sorted(acc):
        v = acc[key]
        if v != 0:
            lines.append(f"{key[0]} {key[1]} {key[2]} {key[3]} {v:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="ascii") as fh:
            fh.write(text)


@dataclass
class SdpaData:
    """Raw content of an SDPA file: ``F[k][m]`` is the dense matrix ``F_m`` of block ``k``."""

    nvars: int
    block_struct: list
    c: np.ndarray
    F: list


def parse_sdpa(path_or_buf) -> SdpaData:
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, encoding="ascii") as fh:
            text = fh.read()
    tokens = []
    for line in io.StringIO(text):
        s = line.strip()
        if not s or s[0] in '"*':
            continue
        tokens.append(s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " "))
    nvars = int(tokens[0].split()[0])
    nb = int(tokens[1].split()[0])
    struct = [int(v) for v in tokens[2].split()[:nb]]
    c = np.array([float(v) for v in tokens[3].split()[:nvars]])
    F = [[np.zeros((abs(s), abs(s))) for _ in range(nvars + 1)] for s in struct]
    for line in tokens[4:]:
        m, k, i, j, v = line.split()[:5]
        m, k, i, j, v = int(m), int(k) - 1, int(i) - 1, int(j) - 1, float(v)
        F[k][m][i, j] = v
        F[k][m][j, i] = v
    return SdpaData(nvars, struct, c, F)
