"""Formal calculus of determinant lines.

A determinant line is tracked as a word of labeled atoms with integer
exponents.  Elements carry a log-scale scalar relative to the canonical
generator of each atom (the designated admissible inner product), plus the
orientation flag.  There is no canonical isomorphism from a nontrivial line
to the reals, so every identification (rescaling, short exact sequences,
pushforwards) is explicit and carries a positive scalar factor.

Scalars of inner-product elements are strictly positive, so all bookkeeping
happens in log scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import GroupRingMatrix, fk_det
from .errors import (NotDeterminantClass, NotExact, NotInvertible, NotPositive,
                     ShapeMismatch)
from .numerics import dense_rank


@dataclass(frozen=True)
class LineExpr:
    """Ordered tensor word of (atom label, exponent) pairs."""
    atoms: tuple = ()

    @staticmethod
    def trivial() -> "LineExpr":
        return LineExpr(())

    @staticmethod
    def atom(label, exponent: int = 1) -> "LineExpr":
        if exponent == 0:
            return LineExpr(())
        return LineExpr(((label, int(exponent)),))

    def tensor(self, other: "LineExpr") -> "LineExpr":
        merged = []
        index = {}
        for label, exp in self.atoms + other.atoms:
            if label in index:
                pos = index[label]
                merged[pos] = (label, merged[pos][1] + exp)
            else:
                index[label] = len(merged)
                merged.append((label, exp))
        return LineExpr(tuple((l, e) for l, e in merged if e != 0))

    def dual(self) -> "LineExpr":
        return LineExpr(tuple((l, -e) for l, e in self.atoms))

    def power(self, n: int) -> "LineExpr":
        if n == 0:
            return LineExpr(())
        return LineExpr(tuple((l, e * n) for l, e in self.atoms))

    def is_trivial(self) -> bool:
        return not self.atoms

    def __repr__(self) -> str:
        if not self.atoms:
            return "<1>"
        return " (x) ".join("%s^%d" % (l, e) if e != 1 else str(l)
                            for l, e in self.atoms)


@dataclass(frozen=True)
class LineElement:
    """An element of a determinant line: log scalar relative to the canonical
    generator of the line word, with orientation."""
    line: LineExpr
    log_scalar: float = 0.0
    positive: bool = True

    def tensor(self, other: "LineElement") -> "LineElement":
        return LineElement(self.line.tensor(other.line),
                           self.log_scalar + other.log_scalar,
                           self.positive and other.positive)

    def power(self, n: int) -> "LineElement":
        return LineElement(self.line.power(n), self.log_scalar * n, self.positive)

    def inverse(self) -> "LineElement":
        return LineElement(self.line.dual(), -self.log_scalar, self.positive)

    def scaled(self, log_factor: float) -> "LineElement":
        return LineElement(self.line, self.log_scalar + log_factor, self.positive)

    @property
    def scalar(self) -> float:
        v = float(np.exp(self.log_scalar))
        return v if self.positive else -v


def generator(line: LineExpr) -> LineElement:
    return LineElement(line, 0.0, True)


# ---------------------------------------------------------------------------
# canonical isomorphisms


def rescale_inner_product(e: LineElement, alpha: GroupRingMatrix,
                          **det_options) -> LineElement:
    """Replace the underlying inner product by <alpha -, ->: the element
    picks up the factor Det'(alpha)^(-1/2)."""
    if alpha.rows != alpha.cols:
        raise ShapeMismatch("rescaling operator must be square")
    if (alpha - alpha.star()).coeff_sup() > 1e-10 * max(alpha.coeff_sup(), 1.0):
        raise NotPositive("rescaling operator must be self-adjoint")
    res = fk_det(alpha, **det_options)
    if not res.invertible:
        raise NotPositive("rescaling operator is not invertible")
    _require_positive_realization(alpha)
    return e.scaled(-0.5 * res.log_det)


def _require_positive_realization(alpha: GroupRingMatrix, tol: float = 1e-12):
    if alpha.algebra.torus_rank == 0:
        w = np.linalg.eigvalsh(alpha.realize_dense())
    else:
        from .numerics import grid_chunks
        k = alpha.algebra.torus_rank
        res = 17 if k <= 2 else 5
        thetas = next(grid_chunks(k, res, chunk=res ** k))
        w = np.linalg.eigvalsh(alpha.symbol(thetas))
    if w.size and w.min() <= tol:
        raise NotPositive("operator has min eigenvalue %.3e" % (w.min() if w.size else 0.0))


@dataclass
class LineIso:
    """Oriented isomorphism between determinant lines with a positive factor:
    it maps the canonical generator of `source` to exp(log_factor) times the
    canonical generator of `target`."""
    source: LineExpr
    target: LineExpr
    log_factor: float

    def apply(self, e: LineElement) -> LineElement:
        # e = s * gen(source) maps to s * exp(log_factor) * gen(target)
        return LineElement(self.target, e.log_scalar + self.log_factor, e.positive)

    def compose(self, other: "LineIso") -> "LineIso":
        return LineIso(other.source, self.target, self.log_factor + other.log_factor)


def ses_iso(alpha, beta, *, source_line: LineExpr | None = None,
            target_line: LineExpr | None = None, eps_rel: float = 1e-10,
            tol: float = 1e-9, **det_options) -> LineIso:
    """Canonical isomorphism det H' (x) det H'' -> det H attached to a short
    exact sequence 0 -> H' --alpha--> H --beta--> H'' -> 0.

    The scalar factor is Det' of the square map [alpha | beta*(beta beta*)^-1]
    assembled through the orthogonal splitting; it is strictly positive, and
    equals 1 for a gram-orthogonal direct sum.
    """
    from .hilbmod import Morphism
    if isinstance(alpha, Morphism):
        amat, bmat = alpha.matrix, beta.matrix
    else:
        amat, bmat = alpha, beta
    if amat.algebra != bmat.algebra:
        raise ShapeMismatch("maps live over different algebras")
    if bmat.rows + amat.cols != amat.rows or bmat.cols != amat.rows:
        raise NotExact("ranks do not add up for a short exact sequence")
    comp = bmat @ amat
    if not _is_numerically_zero(comp, tol):
        raise NotExact("beta after alpha does not vanish")
    if amat.algebra.torus_rank == 0:
        if amat.cols and dense_rank(amat.realize_dense(), eps_rel) != \
                amat.cols * amat.algebra.order:
            raise NotExact("alpha is not injective")
        if bmat.rows and dense_rank(bmat.realize_dense(), eps_rel) != \
                bmat.rows * bmat.algebra.order:
            raise NotExact("beta is not surjective")
        assembled = _assemble_splitting_dense(amat, bmat)
        from .numerics import dense_log_det_prime
        info = dense_log_det_prime(assembled, eps_rel, amat.algebra.order)
        if info.kernel_count:
            raise NotExact("assembled splitting is singular")
        log_factor = info.log_det
    else:
        log_factor = _splitting_log_det_torus(amat, bmat, **det_options)
    src = source_line if source_line is not None else LineExpr.trivial()
    tgt = target_line if target_line is not None else LineExpr.trivial()
    return LineIso(src, tgt, log_factor)


def _is_numerically_zero(m: GroupRingMatrix, tol: float) -> bool:
    if not m.entries:
        return True
    if m.algebra.torus_rank == 0:
        return float(np.abs(m.realize_dense()).max()) <= tol
    from .numerics import grid_chunks
    k = m.algebra.torus_rank
    res = 17 if k <= 2 else 5
    thetas = next(grid_chunks(k, res, chunk=res ** k))
    return float(np.abs(m.symbol(thetas)).max()) <= tol


def _assemble_splitting_dense(amat, bmat) -> np.ndarray:
    a = amat.realize_dense()
    b = bmat.realize_dense()
    if b.shape[0] == 0:
        return a
    bplus = b.conj().T @ np.linalg.inv(b @ b.conj().T)
    if a.shape[1] == 0:
        return bplus
    return np.hstack([a, bplus])


def _splitting_log_det_torus(amat, bmat, grid: int = 256, tol: float = 1e-8,
                             **_ignored) -> float:
    from .numerics import torus_log_det_sum
    aprov = amat.provider()
    bprov = bmat.provider()

    def provider(thetas):
        a = aprov(thetas)
        b = bprov(thetas)
        if b.shape[1] == 0:
            return a
        bh = np.conj(np.transpose(b, (0, 2, 1)))
        bplus = bh @ np.linalg.inv(b @ bh)
        if a.shape[2] == 0:
            return bplus
        return np.concatenate([a, bplus], axis=2)
    out = torus_log_det_sum([provider], [1.0], amat.algebra.torus_rank,
                            amat.algebra.order, start=grid, tol=tol)
    if not out.converged:
        raise NotExact("splitting determinant did not converge")
    if out.smin[0] <= 1e-8:
        raise NotExact("assembled splitting is singular on the torus")
    return out.value


def pushforward(f, *, source_line: LineExpr | None = None,
                target_line: LineExpr | None = None, **det_options) -> LineIso:
    """det A -> det B induced by an isomorphism f: A -> B, with factor Det'(f)."""
    from .hilbmod import Morphism
    mat = f.matrix if isinstance(f, Morphism) else f
    if mat.rows != mat.cols:
        raise NotInvertible("pushforward requires a square matrix")
    res = fk_det(mat, **det_options)
    if not res.invertible:
        raise NotInvertible("map is not invertible (min singular value %.3e)"
                            % res.smin)
    src = source_line if source_line is not None else LineExpr.trivial()
    tgt = target_line if target_line is not None else LineExpr.trivial()
    return LineIso(src, tgt, res.log_det)


def graded_alternating(lines_by_degree) -> LineExpr:
    """Tensor word with exponent signs (-1)^i over the degrees."""
    out = LineExpr.trivial()
    for i, line in enumerate(lines_by_degree):
        if line is None:
            continue
        out = out.tensor(line.power(1 if i % 2 == 0 else -1))
    return out


@dataclass
class TrivializationContext:
    """Canonical trivializations of line atoms induced by inner products on
    reduced cohomology, plus determinant-class certificates.

    log_offsets maps an atom label to the log scalar by which its canonical
    generator differs from the context's generator (0 when they agree);
    certified lists the atoms whose torsion parts have certified determinants.
    """
    log_offsets: dict
    certified: set

    @staticmethod
    def canonical(labels) -> "TrivializationContext":
        return TrivializationContext({l: 0.0 for l in labels}, set(labels))


def trivialize(e: LineElement, context: TrivializationContext) -> float:
    """Rewrite the element through the context trivializations and return the
    resulting real number."""
    log_value = e.log_scalar
    for label, exp in e.line.atoms:
        if label not in context.log_offsets:
            raise NotDeterminantClass("no trivialization for atom %r" % (label,))
        if label not in context.certified:
            raise NotDeterminantClass("atom %r is not certified determinant class"
                                      % (label,))
        log_value += exp * context.log_offsets[label]
    value = float(np.exp(log_value))
    return value if e.positive else -value
