"""Matrix-valued polynomials in the scalar delay ``r`` and their Gram parameterization.

A :class:`PolyMatrix` stores dense coefficients ``C[0..p]`` (shape
``(p+1, rows, cols)``) with ``F(r) = sum_i C[i] r**i``.  An
:class:`AffinePolyMatrix` adds a linear dependence on scalar decision
variables, ``F(r; x) = F0(r) + sum_v x_v F_v(r)``, with the variable terms
held in one stacked array so that products with constant polynomial
matrices are vectorized.

Zero-sized dimensions are allowed everywhere and behave like empty
matrices: they can be stacked, multiplied and composed, and simply drop out
of block compositions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PolyMatrix",
    "AffinePolyMatrix",
    "GramCertificate",
    "LinearEquality",
    "poly_from_scalar",
    "block_compose",
    "gram_expand",
    "gram_match_constraints",
]


def _as_coeffs(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"coefficients must have shape (p+1, rows, cols), got {arr.shape}")
    if arr.shape[0] == 0:
        arr = np.zeros((1,) + arr.shape[1:])
    return arr


def _pad(arr: np.ndarray, length: int, axis: int = 0) -> np.ndarray:
    if arr.shape[axis] >= length:
        return arr
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (0, length - arr.shape[axis])
    return np.pad(arr, pad)


class PolyMatrix:
    """Dense univariate polynomial matrix.

    Parameters
    ----------
    coeffs : array_like
        ``(p+1, rows, cols)`` coefficient stack, lowest power first.  A 2-D
        array is read as a constant.
    symmetric : bool
        Marks the polynomial as symmetric; every coefficient is checked.
    """

    __array_priority__ = 100

    def __init__(self, coeffs, symmetric: bool = False):
        self.coeffs = _as_coeffs(coeffs)
        self.symmetric = bool(symmetric)
        if self.symmetric:
            if self.rows != self.cols:
                raise ValueError("symmetric polynomial matrix must be square")
            tol = 1e-12 * (1.0 + float(np.max(np.abs(self.coeffs), initial=0.0)))
            if not np.allclose(self.coeffs, np.swapaxes(self.coeffs, 1, 2), rtol=0, atol=tol):
                raise ValueError("coefficients are not symmetric")

    # -- construction -----------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int, degree: int = 0) -> "PolyMatrix":
        return cls(np.zeros((degree + 1, rows, cols)))

    @classmethod
    def constant(cls, mat) -> "PolyMatrix":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(mat[None])

    @classmethod
    def identity(cls, n: int) -> "PolyMatrix":
        return cls(np.eye(n)[None])

    @classmethod
    def monomial(cls, mat, power: int) -> "PolyMatrix":
        """``mat * r**power``."""
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        out = np.zeros((power + 1,) + mat.shape)
        out[power] = mat
        return cls(out)

    # -- shape ------------------------------------------------------------
    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[1:]

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(np.any(self.coeffs.reshape(self.coeffs.shape[0], -1) != 0, axis=1))
        return int(nz[-1]) if nz.size else 0

    def trimmed(self) -> "PolyMatrix":
        return PolyMatrix(self.coeffs[: self.degree + 1], symmetric=self.symmetric)

    def padded(self, degree: int) -> "PolyMatrix":
        return PolyMatrix(_pad(self.coeffs, degree + 1), symmetric=self.symmetric)

    # -- evaluation -------------------------------------------------------
    def eval(self, r: float) -> np.ndarray:
        """Horner evaluation at scalar ``r``."""
        out = np.zeros(self.shape)
        for c in self.coeffs[::-1]:
            out = out * r + c
        return out

    __call__ = eval

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, AffinePolyMatrix):
            return other + self
        other = other if isinstance(other, PolyMatrix) else PolyMatrix.constant(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return PolyMatrix(_pad(self.coeffs, n) + _pad(other.coeffs, n),
                          symmetric=self.symmetric and other.symmetric)

    __radd__ = __add__

    def __neg__(self):
        return PolyMatrix(-self.coeffs, symmetric=self.symmetric)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return PolyMatrix(self.coeffs * float(scalar), symmetric=self.symmetric)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, AffinePolyMatrix):
            return other.lmul(self)
        other = other if isinstance(other, PolyMatrix) else PolyMatrix.constant(other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        p, q = self.coeffs.shape[0], other.coeffs.shape[0]
        out = np.zeros((p + q - 1, self.rows, other.cols))
        for i in range(p):
            for j in range(q):
                out[i + j] += self.coeffs[i] @ other.coeffs[j]
        return PolyMatrix(out)

    def __rmatmul__(self, other):
        return PolyMatrix.constant(other) @ self

    @property
    def T(self) -> "PolyMatrix":
        return PolyMatrix(np.swapaxes(self.coeffs, 1, 2), symmetric=self.symmetric)

    def shift(self, k: int = 1) -> "PolyMatrix":
        """Multiply by ``r**k``."""
        return PolyMatrix(np.concatenate([np.zeros((k,) + self.shape), self.coeffs]),
                          symmetric=self.symmetric)

    def kron_identity(self, s: int) -> "PolyMatrix":
        """Coefficient-wise ``C_i kron I_s``."""
        eye = np.eye(s)
        return PolyMatrix(np.stack([np.kron(c, eye) for c in self.coeffs]))

    def sym_double(self) -> "PolyMatrix":
        """``F + F^T``."""
        if self.rows != self.cols:
            raise ValueError("sym_double requires a square polynomial matrix")
        return PolyMatrix(self.coeffs + np.swapaxes(self.coeffs, 1, 2), symmetric=True)

    def poly_scale(self, g: Sequence[float]) -> "PolyMatrix":
        """Multiply by the scalar polynomial with ascending coefficients ``g``."""
        g = np.atleast_1d(np.asarray(g, dtype=float))
        out = np.zeros((self.coeffs.shape[0] + g.size - 1,) + self.shape)
        for i, gi in enumerate(g):
            out[i: i + self.coeffs.shape[0]] += gi * self.coeffs
        return PolyMatrix(out, symmetric=self.symmetric)

    def __repr__(self) -> str:
        return f"PolyMatrix(shape={self.shape}, degree={self.degree})"


def poly_from_scalar(g: Sequence[float]) -> PolyMatrix:
    """1x1 polynomial matrix from ascending scalar coefficients."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    return PolyMatrix(g[:, None, None])


class AffinePolyMatrix:
    """``F0(r) + sum_v x_v F_v(r)`` with integer variable ids ``v``.

    ``var_ids`` is a sorted 1-D integer array; ``terms`` has shape
    ``(len(var_ids), p+1, rows, cols)`` and shares the degree axis with the
    base polynomial.
    """

    def __init__(self, base: PolyMatrix, var_ids=(), terms=None):
        var_ids = np.asarray(var_ids, dtype=np.int64).reshape(-1)
        nb = base.coeffs.shape[0]
        if terms is None:
            terms = np.zeros((0, nb) + base.shape)
        terms = np.asarray(terms, dtype=float)
        if terms.shape[0] != var_ids.size or terms.shape[2:] != base.shape:
            raise ValueError("term stack does not match the base shape / variable ids")
        if np.unique(var_ids).size != var_ids.size:
            raise ValueError("variable ids must be unique")
        n = max(nb, terms.shape[1])
        order = np.argsort(var_ids, kind="stable")
        self.base = base.padded(n - 1) if nb < n else base
        self.var_ids = var_ids[order]
        self.terms = _pad(terms[order], n, axis=1)

    # -- construction -----------------------------------------------------
    @classmethod
    def from_poly(cls, base: PolyMatrix) -> "AffinePolyMatrix":
        return cls(base)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "AffinePolyMatrix":
        return cls(PolyMatrix.zeros(rows, cols))

    # -- shape ------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.base.shape

    @property
    def rows(self) -> int:
        return self.base.rows

    @property
    def cols(self) -> int:
        return self.base.cols

    @property
    def ncoef(self) -> int:
        return self.base.coeffs.shape[0]

    @property
    def degree(self) -> int:
        stack = np.concatenate([self.base.coeffs[None], self.terms], axis=0)
        nz = np.flatnonzero(np.any(np.swapaxes(stack, 0, 1).reshape(self.ncoef, -1) != 0, axis=1))
        return int(nz[-1]) if nz.size else 0

    @property
    def terms_list(self) -> list[tuple[int, PolyMatrix]]:
        return [(int(v), PolyMatrix(t)) for v, t in zip(self.var_ids, self.terms)]

    def coefficient(self, var: int) -> PolyMatrix:
        idx = np.searchsorted(self.var_ids, var)
        if idx < self.var_ids.size and self.var_ids[idx] == var:
            return PolyMatrix(self.terms[idx])
        return PolyMatrix.zeros(*self.shape, degree=self.ncoef - 1)

    def trimmed(self) -> "AffinePolyMatrix":
        n = self.degree + 1
        keep = np.any(self.terms.reshape(self.terms.shape[0], -1) != 0, axis=1)
        return AffinePolyMatrix(PolyMatrix(self.base.coeffs[:n]), self.var_ids[keep], self.terms[keep, :n])

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, PolyMatrix):
            other = AffinePolyMatrix(other)
        if not isinstance(other, AffinePolyMatrix):
            return NotImplemented
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.ncoef, other.ncoef)
        base = PolyMatrix(_pad(self.base.coeffs, n) + _pad(other.base.coeffs, n))
        ids = np.union1d(self.var_ids, other.var_ids)
        terms = np.zeros((ids.size, n) + self.shape)
        terms[np.searchsorted(ids, self.var_ids), : self.ncoef] += self.terms
        terms[np.searchsorted(ids, other.var_ids), : other.ncoef] += other.terms
        return AffinePolyMatrix(base, ids, terms)

    __radd__ = __add__

    def __neg__(self):
        return AffinePolyMatrix(-self.base, self.var_ids, -self.terms)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return AffinePolyMatrix(self.base * scalar, self.var_ids, self.terms * float(scalar))

    __rmul__ = __mul__

    def lmul(self, left: PolyMatrix) -> "AffinePolyMatrix":
        """``left(r) @ self``."""
        left = left if isinstance(left, PolyMatrix) else PolyMatrix.constant(left)
        p = left.coeffs.shape[0]
        out = np.zeros((self.terms.shape[0], self.ncoef + p - 1, left.rows, self.cols))
        for i in range(p):
            out[:, i: i + self.ncoef] += np.einsum("ij,vkjl->vkil", left.coeffs[i], self.terms)
        return AffinePolyMatrix(left @ self.base, self.var_ids, out)

    def rmul(self, right: PolyMatrix) -> "AffinePolyMatrix":
        """``self @ right(r)``."""
        right = right if isinstance(right, PolyMatrix) else PolyMatrix.constant(right)
        p = right.coeffs.shape[0]
        out = np.zeros((self.terms.shape[0], self.ncoef + p - 1, self.rows, right.cols))
        for i in range(p):
            out[:, i: i + self.ncoef] += np.einsum("vkij,jl->vkil", self.terms, right.coeffs[i])
        return AffinePolyMatrix(self.base @ right, self.var_ids, out)

    def __matmul__(self, other):
        return self.rmul(other)

    def __rmatmul__(self, other):
        return self.lmul(other)

    @property
    def T(self) -> "AffinePolyMatrix":
        return AffinePolyMatrix(self.base.T, self.var_ids, np.swapaxes(self.terms, 2, 3))

    def sym_double(self) -> "AffinePolyMatrix":
        if self.rows != self.cols:
            raise ValueError("sym_double requires a square matrix")
        return AffinePolyMatrix(self.base.sym_double(), self.var_ids,
                                self.terms + np.swapaxes(self.terms, 2, 3))

    def poly_scale(self, g: Sequence[float]) -> "AffinePolyMatrix":
        g = np.atleast_1d(np.asarray(g, dtype=float))
        out = np.zeros((self.terms.shape[0], self.ncoef + g.size - 1) + self.shape)
        for i, gi in enumerate(g):
            out[:, i: i + self.ncoef] += gi * self.terms
        return AffinePolyMatrix(self.base.poly_scale(g), self.var_ids, out)

    def shift(self, k: int = 1) -> "AffinePolyMatrix":
        g = np.zeros(k + 1)
        g[k] = 1.0
        return self.poly_scale(g)

    def kron_left(self, mat) -> "AffinePolyMatrix":
        """``mat kron self`` for a constant matrix ``mat``."""
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        base = np.stack([np.kron(mat, c) for c in self.base.coeffs])
        terms = np.einsum("ab,vkij->vkaibj", mat, self.terms).reshape(
            self.terms.shape[:2] + (mat.shape[0] * self.rows, mat.shape[1] * self.cols))
        return AffinePolyMatrix(PolyMatrix(base), self.var_ids, terms)

    # -- evaluation -------------------------------------------------------
    def at(self, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate in ``r``: returns ``(base, terms)`` with terms ``(nv, rows, cols)``."""
        powers = float(r) ** np.arange(self.ncoef)
        return (np.tensordot(powers, self.base.coeffs, axes=(0, 0)),
                np.tensordot(self.terms, powers, axes=(1, 0)) if self.terms.size
                else np.zeros((self.var_ids.size,) + self.shape))

    def value(self, x) -> PolyMatrix:
        """Substitute the full decision vector ``x`` (indexed by variable id)."""
        x = np.asarray(x, dtype=float)
        coeffs = self.base.coeffs.copy()
        if self.var_ids.size:
            coeffs += np.tensordot(x[self.var_ids], self.terms, axes=(0, 0))
        return PolyMatrix(coeffs)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        if self.rows != self.cols:
            return False
        ok = np.allclose(self.base.coeffs, np.swapaxes(self.base.coeffs, 1, 2), atol=atol, rtol=0)
        return ok and np.allclose(self.terms, np.swapaxes(self.terms, 2, 3), atol=atol, rtol=0)

    def __repr__(self) -> str:
        return f"AffinePolyMatrix(shape={self.shape}, degree={self.degree}, nvars={self.var_ids.size})"


def _as_affine(block, rows: int, cols: int) -> AffinePolyMatrix:
    if block is None:
        return AffinePolyMatrix.zeros(rows, cols)
    if isinstance(block, AffinePolyMatrix):
        return block
    if isinstance(block, PolyMatrix):
        return AffinePolyMatrix(block)
    return AffinePolyMatrix(PolyMatrix.constant(block))


def _block_shape(block) -> tuple[int, int] | None:
    if block is None:
        return None
    if isinstance(block, (PolyMatrix, AffinePolyMatrix)):
        return block.shape
    return np.atleast_2d(np.asarray(block)).shape


def block_compose(blocks: Sequence[Sequence]) -> PolyMatrix | AffinePolyMatrix:
    """Assemble a block matrix from a grid of (affine) polynomial matrices.

    ``None`` entries are zero blocks whose size is inferred from the row and
    column they sit in.  Rows or columns of height/width zero contribute
    nothing.  Returns a :class:`PolyMatrix` unless some block is affine.
    """
    nr, nc = len(blocks), len(blocks[0])
    if any(len(row) != nc for row in blocks):
        raise ValueError("ragged block grid")
    heights: list[int | None] = [None] * nr
    widths: list[int | None] = [None] * nc
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            shp = _block_shape(blk)
            if shp is None:
                continue
            if heights[i] is None:
                heights[i] = shp[0]
            elif heights[i] != shp[0]:
                raise ValueError(f"block ({i},{j}) has {shp[0]} rows, expected {heights[i]}")
            if widths[j] is None:
                widths[j] = shp[1]
            elif widths[j] != shp[1]:
                raise ValueError(f"block ({i},{j}) has {shp[1]} cols, expected {widths[j]}")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise ValueError("cannot infer the size of an all-None block row/column")
    affine = any(isinstance(b, AffinePolyMatrix) for row in blocks for b in row)
    R, C = sum(heights), sum(widths)
    if not affine:
        ncoef = max(b.coeffs.shape[0] for row in blocks for b in row if isinstance(b, PolyMatrix)) \
            if any(isinstance(b, PolyMatrix) for row in blocks for b in row) else 1
        out = np.zeros((ncoef, R, C))
        r0 = 0
        for i, row in enumerate(blocks):
            c0 = 0
            for j, blk in enumerate(row):
                if blk is not None and heights[i] and widths[j]:
                    pm = blk if isinstance(blk, PolyMatrix) else PolyMatrix.constant(blk)
                    out[: pm.coeffs.shape[0], r0: r0 + heights[i], c0: c0 + widths[j]] = pm.coeffs
                c0 += widths[j]
            r0 += heights[i]
        return PolyMatrix(out)
    parts = [[_as_affine(b, heights[i], widths[j]) for j, b in enumerate(row)] for i, row in enumerate(blocks)]
    ncoef = max(p.ncoef for row in parts for p in row)
    ids = np.unique(np.concatenate([p.var_ids for row in parts for p in row]))
    base = np.zeros((ncoef, R, C))
    terms = np.zeros((ids.size, ncoef, R, C))
    r0 = 0
    for i, row in enumerate(parts):
        c0 = 0
        for j, p in enumerate(row):
            h, w = heights[i], widths[j]
            if h and w:
                base[: p.ncoef, r0: r0 + h, c0: c0 + w] = p.base.coeffs
                if p.var_ids.size:
                    terms[np.searchsorted(ids, p.var_ids), : p.ncoef, r0: r0 + h, c0: c0 + w] = p.terms
            c0 += w
        r0 += h
    return AffinePolyMatrix(PolyMatrix(base), ids, terms)


# -- Gram (sum-of-squares) machinery --------------------------------------------


@dataclass
class GramCertificate:
    """PSD Gram matrix ``Q`` of size ``(half_degree+1) * base_dim``.

    Certifies ``F(r) = (m(r) kron I)^T Q (m(r) kron I)`` with the ascending
    monomial vector ``m(r) = (1, r, ..., r**half_degree)``.
    """

    base_dim: int
    half_degree: int
    Q: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        n = (self.half_degree + 1) * self.base_dim
        if self.Q.shape != (n, n):
            raise ValueError(f"Gram matrix must be {n}x{n}, got {self.Q.shape}")

    @property
    def min_eig(self) -> float:
        if self.Q.size == 0:
            return float("inf")
        return float(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))[0])


def gram_expand(G: GramCertificate) -> PolyMatrix:
    """Expand a Gram matrix into the polynomial it certifies."""
    m, h = G.base_dim, G.half_degree
    Q = 0.5 * (G.Q + G.Q.T)
    out = np.zeros((2 * h + 1, m, m))
    for i in range(h + 1):
        for j in range(h + 1):
            out[i + j] += Q[i * m: (i + 1) * m, j * m: (j + 1) * m]
    return PolyMatrix(0.5 * (out + np.swapaxes(out, 1, 2)), symmetric=True)


@dataclass
class LinearEquality:
    """``sum_v coef[v] x_v == rhs``."""

    coef: dict
    rhs: float
    label: str = ""


def gram_index_map(base_dim: int, half_degree: int, first_var: int) -> np.ndarray:
    """Variable id of every Gram entry (symmetric: ``(p,q)`` and ``(q,p)`` share an id).

    Ids are assigned row-major over the upper triangle starting at ``first_var``.
    """
    n = (half_degree + 1) * base_dim
    idx = np.zeros((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n)
    ids = first_var + np.arange(iu.size)
    idx[iu, ju] = ids
    idx[ju, iu] = ids
    return idx


def gram_affine(base_dim: int, half_degree: int, first_var: int) -> AffinePolyMatrix:
    """The polynomial ``(m kron I)^T Q (m kron I)`` as an affine function of the Gram entries."""
    m, h = base_dim, half_degree
    n = (h + 1) * m
    iu, ju = np.triu_indices(n)
    nv = iu.size
    terms = np.zeros((nv, 2 * h + 1, m, m))
    for v, (p, q) in enumerate(zip(iu, ju)):
        bi, a = divmod(p, m)
        bj, b = divmod(q, m)
        terms[v, bi + bj, a, b] += 1.0
        if p != q:
            terms[v, bi + bj, b, a] += 1.0
    return AffinePolyMatrix(PolyMatrix.zeros(m, m, 2 * h), first_var + np.arange(nv), terms)


def gram_match_constraints(target: AffinePolyMatrix, half_degree: int,
                           first_var: int, tag: str = "") -> tuple[np.ndarray, list[LinearEquality]]:
    """Coefficient-matching equalities tying a new Gram variable to ``target``.

    Parameters
    ----------
    target : AffinePolyMatrix
        Symmetric ``m x m`` polynomial, affine in existing variables.
    half_degree : int
        ``delta``; the Gram matrix is ``(delta+1) m`` square.
    first_var : int
        Id assigned to the first Gram entry (upper triangle, row-major).

    Returns
    -------
    index_map : ndarray
        ``(delta+1)m`` square array of Gram variable ids.
    equalities : list of LinearEquality
        One per power ``k = 0..2 delta`` and upper-triangular position.

    Raises
    ------
    ValueError
        If ``2 delta`` is smaller than the degree of ``target``.
    """
    if target.rows != target.cols:
        raise ValueError("target must be square")
    deg = target.degree
    if 2 * half_degree < deg:
        raise ValueError(f"half degree {half_degree} too small for a degree-{deg} target")
    m, h = target.rows, half_degree
    idx = gram_index_map(m, h, first_var)
    ncoef = 2 * h + 1
    base = _pad(target.base.coeffs, ncoef)[:ncoef]
    terms = _pad(target.terms, ncoef, axis=1)[:, :ncoef]
    eqs: list[LinearEquality] = []
    for k in range(ncoef):
        for a in range(m):
            for b in range(a, m):
                coef: dict[int, float] = {}
                for i in range(max(0, k - h), min(k, h) + 1):
                    j = k - i
                    v = int(idx[i * m + a, j * m + b])
                    coef[v] = coef.get(v, 0.0) + 1.0
                col = terms[:, k, a, b]
                for v, c in zip(target.var_ids[col != 0], col[col != 0]):
                    coef[int(v)] = coef.get(int(v), 0.0) - float(c)
                coef = {v: c for v, c in coef.items() if c != 0.0}
                eqs.append(LinearEquality(coef, float(base[k, a, b]), f"{tag}[r^{k}]({a},{b})"))
    return idx, eqs


def stack_equalities(eqs: Iterable[LinearEquality]) -> tuple[list, list, list, list]:
    """COO triplets ``(rows, cols, vals, rhs)`` for a list of equalities."""
    rows, cols, vals, rhs = [], [], [], []
    for i, e in enumerate(eqs):
        for v, c in e.coef.items():
            rows.append(i)
            cols.append(v)
            vals.append(c)
        rhs.append(e.rhs)
    return rows, cols, vals, rhs
