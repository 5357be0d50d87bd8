"""Computable models of finite von Neumann algebras with trace.

A model is the group algebra of G x Z^k where G is a finite group given by
its multiplication table and k is the torus rank.  The pure finite-group
model has k = 0, the pure torus model has |G| = 1, and tensor products of
the two kinds land in the mixed model.

Elements are finitely supported maps from keys (g, exps) to complex
coefficients, where g indexes G and exps is a length-k integer vector.
The trace is the coefficient of the identity key; it extends to square
matrices as the sum of diagonal traces, so the trace of the identity on a
rank-n free module is n.

Realizations: for k = 0 an m x n matrix over the algebra becomes the dense
(m|G|) x (n|G|) complex matrix of left regular representations; for k >= 1
it becomes the field of such matrices over the torus, evaluated on batches
of sample angles.
"""

from __future__ import annotations

import numpy as np

from .errors import BadParams, NonConvergent, NotProjection, ShapeMismatch
from .groups import FiniteGroupTable, product_group, trivial_group
from .numerics import (DEFAULT_EPS_REL, dense_log_det_prime, grid_chunks,
                       torus_log_det_sum)

_COEFF_PRUNE = 0.0  # drop exactly-zero coefficients only


class GroupAlgebra:
    """A finite group algebra, a torus algebra, or their tensor product."""

    def __init__(self, group: FiniteGroupTable | None = None, torus_rank: int = 0):
        self.group = group if group is not None else trivial_group()
        if torus_rank < 0:
            raise BadParams("torus rank must be >= 0")
        self.torus_rank = torus_rank

    @property
    def order(self) -> int:
        return self.group.order

    @property
    def kind(self) -> str:
        if self.torus_rank == 0:
            return "finite_group"
        if self.group.order == 1:
            return "torus"
        return "mixed"

    @property
    def identity_key(self):
        return (0, (0,) * self.torus_rank)

    def check_key(self, key) -> tuple:
        g, exps = key
        if not 0 <= g < self.group.order:
            raise BadParams("group index %r out of range" % (g,))
        exps = tuple(int(e) for e in exps)
        if len(exps) != self.torus_rank:
            raise BadParams("exponent vector %r has wrong length" % (exps,))
        return (int(g), exps)

    def mul_key(self, k1, k2):
        return (self.group.mul(k1[0], k2[0]),
                tuple(a + b for a, b in zip(k1[1], k2[1])))

    def inv_key(self, key):
        return (self.group.inv(key[0]), tuple(-e for e in key[1]))

    # -- element constructors ------------------------------------------------

    def element(self, terms) -> "GroupRingElement":
        return GroupRingElement(self, terms)

    def zero(self) -> "GroupRingElement":
        return GroupRingElement(self, {})

    def one(self) -> "GroupRingElement":
        return GroupRingElement(self, {self.identity_key: 1.0})

    def monomial(self, g: int = 0, exps=None, coeff=1.0) -> "GroupRingElement":
        if exps is None:
            exps = (0,) * self.torus_rank
        return GroupRingElement(self, {(g, tuple(exps)): coeff})

    def group_element(self, g: int) -> "GroupRingElement":
        return self.monomial(g=g)

    def torus_generator(self, axis: int = 0) -> "GroupRingElement":
        exps = [0] * self.torus_rank
        exps[axis] = 1
        return self.monomial(exps=exps)

    def tensor(self, other: "GroupAlgebra") -> "GroupAlgebra":
        return GroupAlgebra(product_group(self.group, other.group),
                            self.torus_rank + other.torus_rank)

    def combine_keys(self, other: "GroupAlgebra", k1, k2):
        """Key of k1 (x) k2 inside self.tensor(other)."""
        return (k1[0] * other.group.order + k2[0], k1[1] + k2[1])

    def __eq__(self, other) -> bool:
        return (isinstance(other, GroupAlgebra)
                and self.group == other.group
                and self.torus_rank == other.torus_rank)

    def __hash__(self) -> int:
        return hash((self.group, self.torus_rank))

    def __repr__(self) -> str:
        return "GroupAlgebra(order=%d, torus_rank=%d)" % (self.order, self.torus_rank)


class GroupRingElement:
    """Finitely supported complex combination of keys of a GroupAlgebra."""

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: GroupAlgebra, terms):
        self.algebra = algebra
        clean = {}
        for key, coeff in dict(terms).items():
            key = algebra.check_key(key)
            c = complex(coeff)
            if c != _COEFF_PRUNE:
                clean[key] = clean.get(key, 0.0) + c
        self.terms = {k: c for k, c in clean.items() if c != 0}

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return GroupRingElement(self.algebra, out)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __neg__(self):
        return GroupRingElement(self.algebra, {k: -c for k, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return GroupRingElement(self.algebra,
                                    {k: c * other for k, c in self.terms.items()})
        other = self._coerce(other)
        out = {}
        alg = self.algebra
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = alg.mul_key(k1, k2)
                out[k] = out.get(k, 0.0) + c1 * c2
        return GroupRingElement(alg, out)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self * other
        return self._coerce(other) * self

    def _coerce(self, other) -> "GroupRingElement":
        if isinstance(other, GroupRingElement):
            if other.algebra != self.algebra:
                raise ShapeMismatch("elements live over different algebras")
            return other
        if isinstance(other, (int, float, complex)):
            return GroupRingElement(self.algebra, {self.algebra.identity_key: other})
        raise TypeError("cannot combine GroupRingElement with %r" % type(other))

    def star(self) -> "GroupRingElement":
        alg = self.algebra
        return GroupRingElement(
            alg, {alg.inv_key(k): np.conj(c) for k, c in self.terms.items()})

    def trace(self) -> complex:
        return self.terms.get(self.algebra.identity_key, 0.0)

    def coefficient(self, key) -> complex:
        return self.terms.get(self.algebra.check_key(key), 0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupRingElement):
            return NotImplemented
        return self.algebra == other.algebra and self.terms == other.terms

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for (g, exps), c in sorted(self.terms.items()):
            bits.append("%s*[g%d%s]" % (c, g, "".join(",z%d^%d" % (i, e)
                                                      for i, e in enumerate(exps) if e)))
        return " + ".join(bits)


class GroupRingMatrix:
    """Rectangular matrix over a GroupAlgebra, stored as sparse entries."""

    def __init__(self, algebra: GroupAlgebra, rows: int, cols: int, entries=None):
        self.algebra = algebra
        self.rows = rows
        self.cols = cols
        self.entries = {}
        if entries:
            for (i, j), val in entries.items():
                if not (0 <= i < rows and 0 <= j < cols):
                    raise ShapeMismatch("entry (%d, %d) outside %dx%d" % (i, j, rows, cols))
                if isinstance(val, GroupRingElement):
                    elt = val
                else:
                    elt = algebra.one() * val
                if not elt.is_zero():
                    self.entries[(i, j)] = elt

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, algebra, rows, cols):
        return cls(algebra, rows, cols)

    @classmethod
    def identity(cls, algebra, n):
        one = algebra.one()
        return cls(algebra, n, n, {(i, i): one for i in range(n)})

    @classmethod
    def from_rows(cls, algebra, rows):
        m = len(rows)
        n = len(rows[0]) if m else 0
        entries = {}
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ShapeMismatch("ragged rows")
            for j, val in enumerate(row):
                entries[(i, j)] = val
        return cls(algebra, m, n, entries)

    @classmethod
    def scalar(cls, algebra, n, value):
        return cls(algebra, n, n, {(i, i): algebra.one() * value for i in range(n)})

    def entry(self, i, j) -> GroupRingElement:
        return self.entries.get((i, j), self.algebra.zero())

    @property
    def shape(self):
        return (self.rows, self.cols)

    def is_zero(self) -> bool:
        return not self.entries

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        self._check_same_shape(other)
        out = dict(self.entries)
        for key, val in other.entries.items():
            out[key] = out[key] + val if key in out else val
        return GroupRingMatrix(self.algebra, self.rows, self.cols, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return GroupRingMatrix(self.algebra, self.rows, self.cols,
                               {k: -v for k, v in self.entries.items()})

    def __mul__(self, scalar):
        return GroupRingMatrix(self.algebra, self.rows, self.cols,
                               {k: v * scalar for k, v in self.entries.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, GroupRingMatrix):
            if self.cols != other.rows or self.algebra != other.algebra:
                raise ShapeMismatch("cannot multiply %s by %s" % (self.shape, other.shape))
            out = {}
            by_row = {}
            for (i, k), v in other.entries.items():
                by_row.setdefault(i, []).append((k, v))
            for (i, k), a in self.entries.items():
                for j, b in by_row.get(k, ()):
                    key = (i, j)
                    prod = a * b
                    out[key] = out[key] + prod if key in out else prod
            return GroupRingMatrix(self.algebra, self.rows, other.cols, out)
        return NotImplemented

    def star(self) -> "GroupRingMatrix":
        return GroupRingMatrix(self.algebra, self.cols, self.rows,
                               {(j, i): v.star() for (i, j), v in self.entries.items()})

    def transpose_plain(self) -> "GroupRingMatrix":
        return GroupRingMatrix(self.algebra, self.cols, self.rows,
                               {(j, i): v for (i, j), v in self.entries.items()})

    def kron(self, other: "GroupRingMatrix") -> "GroupRingMatrix":
        """Kronecker product over the tensor algebra."""
        alg = self.algebra.tensor(other.algebra)
        entries = {}
        for (i1, j1), a in self.entries.items():
            for (i2, j2), b in other.entries.items():
                terms = {}
                for k1, c1 in a.terms.items():
                    for k2, c2 in b.terms.items():
                        key = self.algebra.combine_keys(other.algebra, k1, k2)
                        terms[key] = terms.get(key, 0.0) + c1 * c2
                entries[(i1 * other.rows + i2, j1 * other.cols + j2)] = \
                    GroupRingElement(alg, terms)
        return GroupRingMatrix(alg, self.rows * other.rows,
                               self.cols * other.cols, entries)

    @staticmethod
    def block(algebra, grid) -> "GroupRingMatrix":
        """Assemble a block matrix from a 2D grid of GroupRingMatrix or None."""
        row_sizes, col_sizes = [], []
        for bi, brow in enumerate(grid):
            for bj, blk in enumerate(brow):
                if blk is None:
                    continue
                while len(row_sizes) <= bi:
                    row_sizes.append(None)
                while len(col_sizes) <= bj:
                    col_sizes.append(None)
                if row_sizes[bi] is None:
                    row_sizes[bi] = blk.rows
                elif row_sizes[bi] != blk.rows:
                    raise ShapeMismatch("inconsistent block row sizes")
                if col_sizes[bj] is None:
                    col_sizes[bj] = blk.cols
                elif col_sizes[bj] != blk.cols:
                    raise ShapeMismatch("inconsistent block col sizes")
        if any(s is None for s in row_sizes) or any(s is None for s in col_sizes):
            raise ShapeMismatch("block grid leaves a row or column size undetermined")
        row_off = np.concatenate([[0], np.cumsum(row_sizes)])
        col_off = np.concatenate([[0], np.cumsum(col_sizes)])
        entries = {}
        for bi, brow in enumerate(grid):
            for bj, blk in enumerate(brow):
                if blk is None:
                    continue
                for (i, j), v in blk.entries.items():
                    entries[(int(row_off[bi]) + i, int(col_off[bj]) + j)] = v
        return GroupRingMatrix(algebra, int(row_off[-1]), int(col_off[-1]), entries)

    def _check_same_shape(self, other):
        if not isinstance(other, GroupRingMatrix):
            raise TypeError("expected GroupRingMatrix")
        if self.shape != other.shape or self.algebra != other.algebra:
            raise ShapeMismatch("shape or algebra mismatch")

    def coeff_sup(self) -> float:
        """Largest coefficient magnitude over all entries."""
        return max((abs(c) for v in self.entries.values()
                    for c in v.terms.values()), default=0.0)

    # -- realizations ----------------------------------------------------------

    def realize_dense(self) -> np.ndarray:
        """Dense matrix of left regular representations (finite model only)."""
        if self.algebra.torus_rank != 0:
            raise BadParams("dense realization requires torus rank 0")
        n = self.algebra.order
        mult = self.algebra.group.mult
        out = np.zeros((self.rows * n, self.cols * n), dtype=complex)
        cols = np.arange(n)
        for (i, j), elt in self.entries.items():
            for (g, _), c in elt.terms.items():
                out[i * n + mult[g], j * n + cols] += c
        return out

    def symbol(self, thetas: np.ndarray) -> np.ndarray:
        """Evaluate the matrix field at sample angles: (P, k) -> (P, m*N, n*N)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        p = thetas.shape[0]
        n = self.algebra.order
        mult = self.algebra.group.mult
        out = np.zeros((p, self.rows * n, self.cols * n), dtype=complex)
        cols = np.arange(n)
        for (i, j), elt in self.entries.items():
            for (g, exps), c in elt.terms.items():
                phase = c * np.exp(1j * (thetas @ np.asarray(exps, dtype=float)))
                out[:, i * n + mult[g], j * n + cols] += phase[:, None]
        return out

    def realize(self):
        """Concrete realization: dense matrix for the finite model, a symbol
        evaluator for torus and mixed models."""
        if self.algebra.torus_rank == 0:
            return self.realize_dense()
        return self.symbol

    def provider(self):
        """Symbol provider for the quadrature engine (any model)."""
        if self.algebra.torus_rank == 0:
            dense = self.realize_dense()
            return lambda thetas: dense[None, :, :]
        return self.symbol

    def __repr__(self) -> str:
        return "GroupRingMatrix(%dx%d over %r, %d nonzero)" % (
            self.rows, self.cols, self.algebra, len(self.entries))


def from_dense_equivariant(algebra: GroupAlgebra, dense: np.ndarray,
                           rows: int, cols: int, tol: float = 1e-9) -> GroupRingMatrix:
    """Reconstruct a finite-model GroupRingMatrix from its dense realization.

    Coefficients are read off the identity column of each block; the result
    is validated against the input, so non-equivariant matrices are rejected.
    """
    if algebra.torus_rank != 0:
        raise BadParams("unrealization requires the finite model")
    n = algebra.order
    if dense.shape != (rows * n, cols * n):
        raise ShapeMismatch("dense shape does not match %dx%d blocks of size %d"
                            % (rows, cols, n))
    entries = {}
    for i in range(rows):
        for j in range(cols):
            block = dense[i * n:(i + 1) * n, j * n:(j + 1) * n]
            coeffs = {(int(g), ()): block[g, 0] for g in range(n)
                      if abs(block[g, 0]) > 1e-14}
            if coeffs:
                entries[(i, j)] = GroupRingElement(algebra, coeffs)
    out = GroupRingMatrix(algebra, rows, cols, entries)
    err = np.abs(out.realize_dense() - dense).max() if dense.size else 0.0
    if err > tol:
        raise BadParams("matrix is not equivariant (defect %.3e)" % err)
    return out


# ---------------------------------------------------------------------------
# trace, involution, determinant, dimension


def trace(x) -> complex:
    """Normalized trace: coefficient of the identity key.  On matrices it is
    the sum of diagonal traces, so trace(identity on rank n) = n."""
    if isinstance(x, GroupRingElement):
        return x.trace()
    if isinstance(x, GroupRingMatrix):
        if x.rows != x.cols:
            raise ShapeMismatch("trace requires a square matrix")
        return sum((x.entry(i, i).trace() for i in range(x.rows)), 0.0)
    raise TypeError("trace expects a group ring element or matrix")


def involute(a: GroupRingElement) -> GroupRingElement:
    return a.star()


def realize(m: GroupRingMatrix):
    return m.realize()


class FkDetResult:
    """Outcome of a Fuglede-Kadison determinant computation (log scale)."""

    def __init__(self, log_det, det_class, invertible, converged,
                 resolution=0, smin=0.0, smax=0.0, detail=None):
        self.log_det = log_det
        self.det_class = det_class
        self.invertible = invertible
        self.converged = converged
        self.resolution = resolution
        self.smin = smin
        self.smax = smax
        self.detail = detail or {}

    @property
    def value(self) -> float:
        return float(np.exp(self.log_det))

    def __repr__(self) -> str:
        return ("FkDetResult(log_det=%.12g, det_class=%s, invertible=%s)"
                % (self.log_det, self.det_class, self.invertible))


def fk_det(m: GroupRingMatrix, *, eps_rel: float = DEFAULT_EPS_REL,
           grid: int = 256, tol: float = 1e-8, max_points: int = 1 << 21,
           strict: bool = True) -> FkDetResult:
    """log Det' of a square matrix over its algebra.

    Finite model: trace-normalized sum of log singular values above the
    relative cutoff.  Torus and mixed models: midpoint-grid quadrature with
    resolution doubling, Richardson extrapolation and an epsilon ladder;
    raises NonConvergent when the doubling test fails (strict mode).
    """
    if m.rows != m.cols:
        raise ShapeMismatch("Fuglede-Kadison determinant requires a square matrix")
    alg = m.algebra
    if alg.torus_rank == 0:
        info = dense_log_det_prime(m.realize_dense(), eps_rel, alg.order)
        invertible = info.kernel_count == 0 and (
            info.smax == 0.0 or info.smin > 10.0 * eps_rel * info.smax)
        if m.rows == 0:
            invertible = True
        return FkDetResult(info.log_det, True, invertible, True,
                           smin=info.smin, smax=info.smax)
    if m.rows == 0 or m.is_zero():
        return FkDetResult(0.0, True, m.rows == 0, True)
    out = torus_log_det_sum([m.provider()], [1.0], alg.torus_rank, alg.order,
                            start=grid, tol=tol, max_points=max_points)
    if strict and not out.converged:
        raise NonConvergent("grid doubling did not certify tolerance %.1e "
                            "(last residuals %r)" % (tol, out.richardson_history[-2:]))
    smin, smin_prev = out.smin[0], out.smin_previous[0]
    scale = max(out.value, 1.0)
    invertible = (smin > 1e-6 * max(scale, 1.0)
                  and (smin_prev == np.inf or smin > 0.6 * smin_prev))
    return FkDetResult(out.value, out.det_class, invertible, out.converged,
                       resolution=out.resolution, smin=smin,
                       detail={"history": out.raw_history,
                               "richardson": out.richardson_history,
                               "ladder_delta": out.ladder_delta})


def vn_dim(p, *, eps_rel: float = DEFAULT_EPS_REL, tol: float = 1e-8) -> float:
    """von Neumann dimension: trace of a projection, or the rank of a free
    module when given an integer."""
    if isinstance(p, (int, np.integer)):
        if p < 0:
            raise BadParams("module rank must be >= 0")
        return float(p)
    if not isinstance(p, GroupRingMatrix):
        raise TypeError("vn_dim expects a projection matrix or a rank")
    if p.rows != p.cols:
        raise NotProjection("projection must be square")
    defect_sq = p @ p - p
    defect_adj = p.star() - p
    if p.algebra.torus_rank == 0:
        err = 0.0
        for d in (defect_sq, defect_adj):
            if not d.is_zero():
                err = max(err, float(np.abs(d.realize_dense()).max()))
    else:
        res = 37 if p.algebra.torus_rank <= 2 else 7
        thetas = next(grid_chunks(p.algebra.torus_rank, res, chunk=res ** p.algebra.torus_rank))
        err = 0.0
        for d in (defect_sq, defect_adj):
            if not d.is_zero():
                err = max(err, float(np.abs(d.symbol(thetas)).max()))
    if err > tol:
        raise NotProjection("p^2 = p or p* = p fails by %.3e" % err)
    val = trace(p)
    return float(np.real(val))
