"""Hilbertian modules, equivariant morphisms and the spectral toolkit.

A module is a free rank-n module over a GroupAlgebra equipped with an
admissible inner product represented by a positive invertible gram operator
over the group ring (identity by default).  Keeping grams inside the group
ring makes equivariance automatic.

Gram operators that actually vary over the torus cannot be inverted inside
the Laurent model, so gram-corrected adjoints are available for the finite
model and for torus grams with constant coefficients; everything else is
rejected rather than approximated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import GroupAlgebra, GroupRingMatrix, from_dense_equivariant
from .errors import (NotComplex, NotPositive, ShapeMismatch,
                     UnsupportedModelPair)
from .numerics import (DEFAULT_EPS_REL, batched_pos_power, dense_kernel_basis,
                       dense_pos_power, torus_kernel_dimension)

_module_counter = [0]


def _next_label() -> str:
    _module_counter[0] += 1
    return "M%d" % _module_counter[0]


@dataclass
class HilbertianModule:
    algebra: GroupAlgebra
    rank: int
    gram: GroupRingMatrix | None = None
    label: str = field(default_factory=_next_label)

    def __post_init__(self):
        if self.rank < 0:
            raise ShapeMismatch("rank must be >= 0")
        if self.gram is not None:
            if self.gram.shape != (self.rank, self.rank):
                raise ShapeMismatch("gram shape does not match rank")
            if self.gram.algebra != self.algebra:
                raise ShapeMismatch("gram lives over the wrong algebra")

    def has_identity_gram(self) -> bool:
        if self.gram is None:
            return True
        return not (self.gram - GroupRingMatrix.identity(self.algebra, self.rank)).entries

    def gram_or_identity(self) -> GroupRingMatrix:
        return self.gram if self.gram is not None else \
            GroupRingMatrix.identity(self.algebra, self.rank)

    def validate_gram(self, tol: float = 1e-10) -> None:
        """Self-adjointness and positivity on the realization."""
        if self.gram is None or self.rank == 0:
            return
        scale = max(self.gram.coeff_sup(), 1.0)
        if (self.gram - self.gram.star()).coeff_sup() > tol * scale:
            raise NotPositive("gram is not self-adjoint")
        if self.algebra.torus_rank == 0:
            w = np.linalg.eigvalsh(self.gram.realize_dense())
        else:
            from .numerics import grid_chunks
            res = 17 if self.algebra.torus_rank <= 2 else 5
            thetas = next(grid_chunks(self.algebra.torus_rank, res,
                                      chunk=res ** self.algebra.torus_rank))
            w = np.linalg.eigvalsh(self.gram.symbol(thetas))
        if w.min() <= tol:
            raise NotPositive("gram has min eigenvalue %.3e" % w.min())

    def tensor(self, other: "HilbertianModule") -> "HilbertianModule":
        gram = None
        if self.gram is not None or other.gram is not None:
            gram = self.gram_or_identity().kron(other.gram_or_identity())
        return HilbertianModule(self.algebra.tensor(other.algebra),
                                self.rank * other.rank, gram,
                                "%s(x)%s" % (self.label, other.label))

    def dimension(self) -> float:
        return float(self.rank)


def free_module(algebra: GroupAlgebra, rank: int, label: str | None = None) -> HilbertianModule:
    if label is None:
        return HilbertianModule(algebra, rank)
    return HilbertianModule(algebra, rank, None, label)


class Morphism:
    """Equivariant map between Hilbertian modules, given by a group ring matrix
    acting on column coordinates."""

    def __init__(self, source: HilbertianModule, target: HilbertianModule,
                 matrix: GroupRingMatrix):
        if matrix.shape != (target.rank, source.rank):
            raise ShapeMismatch("matrix %s does not map rank %d to rank %d"
                               % (matrix.shape, source.rank, target.rank))
        if matrix.algebra != source.algebra or source.algebra != target.algebra:
            raise ShapeMismatch("morphism pieces live over different algebras")
        self.source = source
        self.target = target
        self.matrix = matrix

    @classmethod
    def identity(cls, module: HilbertianModule) -> "Morphism":
        return cls(module, module, GroupRingMatrix.identity(module.algebra, module.rank))

    @classmethod
    def zero(cls, source: HilbertianModule, target: HilbertianModule) -> "Morphism":
        return cls(source, target, GroupRingMatrix.zeros(source.algebra,
                                                         target.rank, source.rank))

    def __matmul__(self, other: "Morphism") -> "Morphism":
        if other.target.rank != self.source.rank:
            raise ShapeMismatch("composition rank mismatch")
        return Morphism(other.source, self.target, self.matrix @ other.matrix)

    def __add__(self, other: "Morphism") -> "Morphism":
        return Morphism(self.source, self.target, self.matrix + other.matrix)

    def __sub__(self, other: "Morphism") -> "Morphism":
        return Morphism(self.source, self.target, self.matrix - other.matrix)

    def adjoint(self) -> "Morphism":
        """Gram-corrected adjoint: G_src^-1 M* G_tgt."""
        mstar = self.matrix.star()
        if self.source.has_identity_gram() and self.target.has_identity_gram():
            return Morphism(self.target, self.source, mstar)
        out = gram_inverse(self.source.gram_or_identity()) @ mstar \
            @ self.target.gram_or_identity()
        return Morphism(self.target, self.source, out)

    def tensor(self, other: "Morphism") -> "Morphism":
        return Morphism(self.source.tensor(other.source),
                        self.target.tensor(other.target),
                        self.matrix.kron(other.matrix))

    def realize_dense(self) -> np.ndarray:
        """Weighted dense realization (finite model): G_t^(1/2) M G_s^(-1/2),
        whose singular values are the gram-metric singular values of the map."""
        dense = self.matrix.realize_dense()
        if not self.source.has_identity_gram():
            gs = dense_pos_power(self.source.gram_or_identity().realize_dense(), -0.5)
            dense = dense @ gs
        if not self.target.has_identity_gram():
            gt = dense_pos_power(self.target.gram_or_identity().realize_dense(), 0.5)
            dense = gt @ dense
        return dense

    def provider(self):
        """Weighted symbol provider for the quadrature engine."""
        if self.source.has_identity_gram() and self.target.has_identity_gram():
            return self.matrix.provider()
        if self.matrix.algebra.torus_rank == 0:
            dense = self.realize_dense()
            return lambda thetas: dense[None, :, :]
        gs = self.source.gram_or_identity()
        gt = self.target.gram_or_identity()
        mat = self.matrix

        def weighted(thetas):
            sym = mat.symbol(thetas)
            sym = batched_pos_power(gt.symbol(thetas), 0.5) @ sym
            return sym @ batched_pos_power(gs.symbol(thetas), -0.5)
        return weighted

    def __repr__(self) -> str:
        return "Morphism(%s -> %s)" % (self.source.label, self.target.label)


def gram_inverse(g: GroupRingMatrix) -> GroupRingMatrix:
    """Inverse of a positive gram operator inside the group ring.

    Supported when the algebra is finite, or when every coefficient is
    constant in the torus variables (then the finite block inverts densely).
    """
    alg = g.algebra
    if alg.torus_rank == 0:
        inv = np.linalg.inv(g.realize_dense())
        return from_dense_equivariant(alg, inv, g.rows, g.cols)
    if any(any(e != 0 for e in key[1]) for entry in g.entries.values()
           for key in entry.terms):
        raise UnsupportedModelPair(
            "gram inversion with torus-dependent coefficients is not supported")
    finite = GroupAlgebra(alg.group, 0)
    flat = GroupRingMatrix(finite, g.rows, g.cols,
                           {pos: finite.element({(k[0], ()): c for k, c in v.terms.items()})
                            for pos, v in g.entries.items()})
    inv = gram_inverse(flat)
    back = GroupRingMatrix(alg, g.rows, g.cols,
                           {pos: alg.element({(k[0], (0,) * alg.torus_rank): c
                                              for k, c in v.terms.items()})
                            for pos, v in inv.entries.items()})
    return back


def adjoint(f: Morphism) -> Morphism:
    return f.adjoint()


def tensor(f1: Morphism, f2: Morphism) -> Morphism:
    return f1.tensor(f2)


# ---------------------------------------------------------------------------
# extended objects and spectral decompositions


@dataclass
class ExtendedObject:
    """An object of the extended category: a morphism alpha: A' -> A."""
    alpha: Morphism


@dataclass
class TorsionPart:
    """Nonzero spectral data of a morphism corestricted to the closure of its
    image; enough to evaluate determinants, not the category structure."""
    log_det: float
    spectrum: np.ndarray | None  # singular values above the cutoff, finite model
    vn_rank: float


@dataclass
class ProjectivePart:
    dimension: float
    basis: np.ndarray | None  # dense orthonormal cokernel basis, finite model


def tp_decompose(x: ExtendedObject, eps_rel: float = DEFAULT_EPS_REL
                 ) -> tuple[TorsionPart, ProjectivePart]:
    """Split an extended object into torsion and projective parts."""
    f = x.alpha
    alg = f.matrix.algebra
    n_target = f.target.rank
    if alg.torus_rank == 0:
        order = alg.order
        dense = f.realize_dense()
        if dense.size == 0:
            return (TorsionPart(0.0, np.array([]), 0.0),
                    ProjectivePart(float(n_target), np.eye(n_target * order)))
        s = np.linalg.svd(dense, compute_uv=False)
        cut = eps_rel * max(float(s.max()), 1e-300)
        keep = s > cut
        vn_rank = float(keep.sum()) / order
        coker = dense_kernel_basis(dense @ dense.conj().T, eps_rel)
        return (TorsionPart(float(np.log(s[keep]).sum()) / order, s[keep], vn_rank),
                ProjectivePart(float(n_target) - vn_rank, coker))
    if f.source.rank == 0 or f.matrix.is_zero():
        return (TorsionPart(0.0, None, 0.0), ProjectivePart(float(n_target), None))
    prov = f.provider()

    def coker_symbol(thetas):
        sym = prov(thetas)
        return sym @ np.conj(np.transpose(sym, (0, 2, 1)))
    coker_dim = torus_kernel_dimension(coker_symbol, alg.torus_rank, alg.order)
    from .algebra import fk_det
    sq = f.matrix.star() @ f.matrix
    res = fk_det(sq, strict=False)
    vn_rank = float(n_target) - coker_dim
    return (TorsionPart(0.5 * res.log_det, None, vn_rank),
            ProjectivePart(coker_dim, None))


@dataclass
class HarmonicData:
    """Kernel of the Laplacian at one position of a complex."""
    betti: float
    basis: np.ndarray | None        # dense orthonormal basis, finite model
    projector: GroupRingMatrix | None


def laplacian(d_in: Morphism | None, d_out: Morphism | None) -> GroupRingMatrix:
    """d_in d_in^adj + d_out^adj d_out on the middle module."""
    if d_in is None and d_out is None:
        raise ShapeMismatch("laplacian needs at least one differential")
    pieces = []
    if d_in is not None and d_in.source.rank and d_in.target.rank:
        pieces.append((d_in @ d_in.adjoint()).matrix)
    if d_out is not None and d_out.source.rank and d_out.target.rank:
        pieces.append((d_out.adjoint() @ d_out).matrix)
    if not pieces:
        mod = d_in.target if d_in is not None else d_out.source
        return GroupRingMatrix.zeros(mod.algebra, mod.rank, mod.rank)
    out = pieces[0]
    for p in pieces[1:]:
        out = out + p
    return out


def harmonic_projection(d_in: Morphism | None, d_out: Morphism | None,
                        eps_rel: float = DEFAULT_EPS_REL,
                        tol: float = 1e-10) -> HarmonicData:
    """Projection onto ker(d_in d_in* + d_out* d_out); its von Neumann
    dimension is the L2-Betti number at this position.

    The kernel is computed in gram-weighted coordinates, where the Laplacian
    is hermitian; the returned basis lives in those coordinates, while the
    projector (finite model) is expressed over the group ring in the original
    ones.
    """
    if d_in is not None and d_out is not None:
        comp = (d_out @ d_in).matrix
        if not comp.is_zero():
            if comp.algebra.torus_rank == 0:
                err = float(np.abs(comp.realize_dense()).max())
            else:
                from .numerics import grid_chunks
                k = comp.algebra.torus_rank
                res = 17 if k <= 2 else 5
                thetas = next(grid_chunks(k, res, chunk=res ** k))
                err = float(np.abs(comp.symbol(thetas)).max())
            if err > tol:
                raise NotComplex("d_out after d_in has norm %.3e" % err)
    mod = d_in.target if d_in is not None else d_out.source
    alg = mod.algebra
    if mod.rank == 0:
        return HarmonicData(0.0, np.zeros((0, 0)), None)
    if alg.torus_rank == 0:
        dim = mod.rank * alg.order
        delta = np.zeros((dim, dim), dtype=complex)
        if d_in is not None and d_in.source.rank and d_in.target.rank:
            a = d_in.realize_dense()
            delta += a @ a.conj().T
        if d_out is not None and d_out.source.rank and d_out.target.rank:
            b = d_out.realize_dense()
            delta += b.conj().T @ b
        basis = dense_kernel_basis(delta, eps_rel)
        betti = basis.shape[1] / alg.order
        proj_w = basis @ basis.conj().T if basis.size else np.zeros((dim, dim))
        if not mod.has_identity_gram():
            g = mod.gram_or_identity().realize_dense()
            proj_w = dense_pos_power(g, -0.5) @ proj_w @ dense_pos_power(g, 0.5)
        projector = from_dense_equivariant(alg, proj_w, mod.rank, mod.rank)
        return HarmonicData(betti, basis, projector)

    def delta_symbol(thetas):
        dim = mod.rank * alg.order
        out = np.zeros((thetas.shape[0], dim, dim), dtype=complex)
        if d_in is not None and d_in.source.rank and d_in.target.rank:
            a = d_in.provider()(thetas)
            out += a @ np.conj(np.transpose(a, (0, 2, 1)))
        if d_out is not None and d_out.source.rank and d_out.target.rank:
            b = d_out.provider()(thetas)
            out += np.conj(np.transpose(b, (0, 2, 1))) @ b
        return out
    betti = torus_kernel_dimension(delta_symbol, alg.torus_rank, alg.order,
                                   eps_rel=max(eps_rel, 1e-10))
    return HarmonicData(betti, None, None)
