"""Interval positivity of polynomial matrices as semidefinite constraints.

``F(r) >= 0`` on ``[r1, r2]`` is relaxed to: ``F + g Fhat`` and ``Fhat``
are sums of squares, with ``g(r) = (r - r1)(r - r2) <= 0`` on the interval.
Each sum of squares is parameterized by its Gram matrix, giving one PSD
block plus coefficient-matching equalities.  Matrices affine in ``r`` skip
the relaxation: positivity at both endpoints is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np
import scipy.sparse as sp

from .builder import DecisionLayout
from .model import DelayRange
from .polymatrix import AffinePolyMatrix, gram_index_map, gram_match_constraints, stack_equalities
from .sdp import LmiBlock, SdpProblem

__all__ = [
    "RelaxationPlan",
    "ConstraintSet",
    "SosRecord",
    "relax_positive_on_interval",
    "relax_negative_on_interval",
    "vertex_path",
    "constraint_on_interval",
    "assemble",
    "default_half_degrees",
]


@dataclass(frozen=True)
class RelaxationPlan:
    """Gram half-degrees per constraint.

    ``None`` entries are chosen automatically from the polynomial degree
    (see :func:`default_half_degrees`).  ``vertex`` selects when the
    endpoint path is used: ``"auto"`` (degree at most one), ``"never"``.
    """

    pi: tuple = (None, None)
    s: tuple = (None, None)
    u: tuple = (None, None)
    theta: tuple = (None, None)
    vertex: str = "auto"

    def __post_init__(self):
        if self.vertex not in ("auto", "never"):
            raise ValueError(f"unknown vertex policy {self.vertex!r}")
        for pair in (self.pi, self.s, self.u, self.theta):
            if len(pair) != 2 or any(v is not None and (int(v) != v or v < 0) for v in pair):
                raise ValueError(f"half degrees must be pairs of nonnegative ints or None, got {pair}")

    @classmethod
    def from_deltas(cls, deltas) -> "RelaxationPlan":
        """From the flat list ``(d1, ..., d8)``."""
        d = list(deltas) + [None] * (8 - len(deltas))
        return cls(pi=(d[0], d[1]), s=(d[2], d[3]), u=(d[4], d[5]), theta=(d[6], d[7]))


def default_half_degrees(degree: int, delta=None, delta_hat=None) -> tuple[int, int]:
    """``delta = max(1, ceil(degree/2))`` and ``delta_hat = delta - 1`` unless given."""
    if delta is None:
        delta = max(1, ceil(degree / 2))
        if delta_hat is not None:
            delta = max(delta, delta_hat + 1)
    if delta_hat is None:
        delta_hat = max(0, delta - 1)
    return int(delta), int(delta_hat)


@dataclass
class SosRecord:
    """Bookkeeping for one relaxed constraint, used to rebuild certificates."""

    tag: str
    sign: int
    path: str
    F: AffinePolyMatrix
    half_degree: int = 0
    mult_half_degree: int = 0
    gram_index: np.ndarray | None = None
    mult_index: np.ndarray | None = None
    points: tuple = ()


@dataclass
class ConstraintSet:
    blocks: list = field(default_factory=list)      # (name, kind, payload)
    equalities: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def extend(self, other: "ConstraintSet") -> "ConstraintSet":
        self.blocks += other.blocks
        self.equalities += other.equalities
        self.records += other.records
        return self


def _check(F: AffinePolyMatrix):
    if F.rows != F.cols or not F.is_symmetric(atol=1e-9):
        raise ValueError("constraint matrix must be square and symmetric")


def _relax(F: AffinePolyMatrix, sign: int, rng: DelayRange, half_degree, mult_half_degree,
           layout: DecisionLayout, tag: str) -> ConstraintSet:
    _check(F)
    G = F if sign > 0 else -F
    delta, dhat = default_half_degrees(G.degree, half_degree, mult_half_degree)
    m = G.rows
    mult, mfirst = layout.gram(f"{tag}.mult", m, dhat)
    target = G + mult.poly_scale(rng.g)
    if 2 * delta < target.degree:
        raise ValueError(f"{tag}: half degree {delta} too small for degree {target.degree}")
    n = (delta + 1) * m
    first = layout.nvars
    layout.allocate(f"{tag}.gram", n * (n + 1) // 2)
    idx, eqs = gram_match_constraints(target, delta, first, tag)
    midx = gram_index_map(m, dhat, mfirst)
    cs = ConstraintSet()
    cs.blocks.append((f"{tag}.gram", "gram", idx))
    cs.blocks.append((f"{tag}.mult", "gram", midx))
    cs.equalities += eqs
    cs.records.append(SosRecord(tag, sign, "sos", F, delta, dhat, idx, midx, (rng.r1, rng.r2)))
    return cs


def relax_positive_on_interval(F: AffinePolyMatrix, rng: DelayRange, layout: DecisionLayout,
                               half_degree=None, mult_half_degree=None, tag: str = "F") -> ConstraintSet:
    """``F + g Fhat`` SoS and ``Fhat`` SoS."""
    return _relax(F, +1, rng, half_degree, mult_half_degree, layout, tag)


def relax_negative_on_interval(F: AffinePolyMatrix, rng: DelayRange, layout: DecisionLayout,
                               half_degree=None, mult_half_degree=None, tag: str = "F") -> ConstraintSet:
    """``-F + g Fhat`` SoS and ``Fhat`` SoS."""
    return _relax(F, -1, rng, half_degree, mult_half_degree, layout, tag)


def vertex_path(F: AffinePolyMatrix, points, sign: int = +1, tag: str = "F") -> ConstraintSet:
    """``sign * F(r) > 0`` at each point; exact on an interval when ``F`` is affine in ``r``.

    A constant ``F`` gives a single block; duplicate points are merged.
    """
    _check(F)
    if F.degree > 1 and len(set(points)) > 1:
        raise ValueError(f"{tag}: vertex path needs degree <= 1, got {F.degree}")
    pts = sorted(set(float(p) for p in points))
    if F.degree == 0:
        pts = pts[:1]
    cs = ConstraintSet()
    G = F if sign > 0 else -F
    for k, r in enumerate(pts):
        base, terms = G.at(r)
        name = tag if len(pts) == 1 else f"{tag}@{k}"
        cs.blocks.append((name, "dense", (0.5 * (base + base.T), G.var_ids, terms)))
    cs.records.append(SosRecord(tag, sign, "vertex", F, points=tuple(pts)))
    return cs


def constraint_on_interval(F: AffinePolyMatrix, sign: int, rng: DelayRange | None, r0: float | None,
                           layout: DecisionLayout, deltas: tuple, vertex: str, tag: str) -> ConstraintSet:
    """Pick the endpoint path or the relaxation for ``sign * F > 0``.

    With ``rng=None`` the constraint is imposed pointwise at ``r0``.
    """
    if rng is None:
        return vertex_path(F, [r0], sign, tag)
    if F.degree <= 1 and vertex == "auto":
        return vertex_path(F, [rng.r1, rng.r2], sign, tag)
    if sign > 0:
        return relax_positive_on_interval(F, rng, layout, *deltas, tag=tag)
    return relax_negative_on_interval(F, rng, layout, *deltas, tag=tag)


def _gram_block(name: str, idx: np.ndarray, nvars: int) -> LmiBlock:
    n = idx.shape[0]
    rows = np.arange(n * n)
    mat = sp.csc_matrix((np.ones(n * n), (rows, idx.reshape(-1))), shape=(n * n, nvars))
    return LmiBlock(name, np.zeros((n, n)), mat, strict=True)


def assemble(cs: ConstraintSet, layout: DecisionLayout, c=None) -> SdpProblem:
    """Turn a constraint set into an :class:`SdpProblem` over all allocated variables."""
    nv = layout.nvars
    blocks = []
    for name, kind, payload in cs.blocks:
        if kind == "gram":
            if payload.size:
                blocks.append(_gram_block(name, payload, nv))
        else:
            base, ids, terms = payload
            if base.size:
                blocks.append(LmiBlock.from_dense_terms(name, base, ids, terms, nv))
    rows, cols, vals, rhs = stack_equalities(cs.equalities)
    E = sp.csr_matrix((vals, (rows, cols)), shape=(len(rhs), nv))
    E.sum_duplicates()
    return SdpProblem(nv, np.zeros(nv) if c is None else c, blocks, E, np.asarray(rhs))
