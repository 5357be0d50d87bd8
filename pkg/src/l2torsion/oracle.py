"""Independent brute-force oracles for the main torsion pipeline.

These deliberately avoid the library's determinant engine: they consume the
realization primitive (dense regular representations / torus symbols) and
do everything else with their own linear algebra, so that agreement with
the main path is meaningful evidence.

  * torsion_via_laplacian: the half-alternating-weighted Laplacian formula.
  * torsion_via_dense: the classical based-torsion construction on the
    unrolled complex vector spaces, with harmonic trivialization and the
    1/|G| trace normalization.
  * mahler_refine: grid-doubling quadrature for log Mahler measures with a
    Richardson-style error bound.
"""

from __future__ import annotations

import numpy as np

from .algebra import GroupRingElement, GroupRingMatrix
from .errors import BadParams, NonConvergent, NotDeterminantClass

_EIG_CUT = 1e-11


def _weighted_dense(complex_, i) -> np.ndarray:
    """Gram-weighted dense differential, with the oracle's own weighting."""
    d = complex_.differentials[i]
    mat = d.matrix.realize_dense()
    if not d.source.has_identity_gram():
        w, v = np.linalg.eigh(d.source.gram_or_identity().realize_dense())
        mat = mat @ (v * w ** -0.5) @ v.conj().T
    if not d.target.has_identity_gram():
        w, v = np.linalg.eigh(d.target.gram_or_identity().realize_dense())
        mat = (v * w ** 0.5) @ v.conj().T @ mat
    return mat


def _log_det_prime_eigs(eigs: np.ndarray) -> float:
    scale = float(eigs.max(initial=0.0))
    if scale <= 0.0:
        return 0.0
    keep = eigs > _EIG_CUT * scale
    return float(np.log(eigs[keep]).sum())


def _mesh(torus_rank: int, resolution: int) -> np.ndarray:
    axes = [2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution] * torus_rank
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def torsion_via_laplacian(complex_, *, grid: int = 256, tol: float = 1e-8) -> float:
    """(1/2) sum_i (-1)^(i+1) i log Det'(Delta_i) with Delta_i = d d* + d* d.

    Valid for determinant-class complexes; raises NotDeterminantClass when
    the torus quadrature for a Laplacian fails to stabilize.
    """
    alg = complex_.algebra
    n = complex_.length
    if alg.torus_rank == 0:
        total = 0.0
        order = alg.order
        for i in range(n):
            if complex_.rank(i) == 0:
                continue
            dim = complex_.rank(i) * order
            delta = np.zeros((dim, dim), dtype=complex)
            if i > 0 and complex_.rank(i - 1):
                a = _weighted_dense(complex_, i - 1)
                delta += a @ a.conj().T
            if i < n - 1 and complex_.rank(i + 1):
                b = _weighted_dense(complex_, i)
                delta += b.conj().T @ b
            eigs = np.linalg.eigvalsh(delta)
            total += 0.5 * (-1) ** (i + 1) * i * _log_det_prime_eigs(eigs) / order
        return total

    def value_at(res: int) -> float:
        thetas = _mesh(alg.torus_rank, res)
        total = 0.0
        for i in range(n):
            if complex_.rank(i) == 0 or i == 0:
                continue
            dim = complex_.rank(i) * alg.order
            delta = np.zeros((len(thetas), dim, dim), dtype=complex)
            if complex_.rank(i - 1):
                a = complex_.differentials[i - 1].provider()(thetas)
                delta += a @ np.conj(np.transpose(a, (0, 2, 1)))
            if i < n - 1 and complex_.rank(i + 1):
                b = complex_.differentials[i].provider()(thetas)
                delta += np.conj(np.transpose(b, (0, 2, 1))) @ b
            eigs = np.linalg.eigvalsh(delta)
            scale = float(eigs.max(initial=0.0))
            if scale > 0.0:
                kept = np.where(eigs > _EIG_CUT * scale, eigs, 1.0)
                total += 0.5 * (-1) ** (i + 1) * i \
                    * float(np.log(kept).sum()) / (len(thetas) * alg.order)
        return total

    if alg.torus_rank >= 2:
        grid = min(grid, 64)
    vals = [value_at(grid), value_at(2 * grid), value_at(4 * grid)]
    rich = [2 * vals[i] - vals[i - 1] for i in (1, 2)]
    if abs(rich[1] - rich[0]) > max(50 * tol, 1e-6):
        raise NotDeterminantClass("laplacian quadrature did not stabilize: %r" % rich)
    return rich[1]


def torsion_via_dense(complex_) -> float:
    """Classical based torsion of the realized complex (finite model).

    Milnor's construction: for each degree pick an orthonormal basis of the
    orthogonal complement of the kernel (b_i), the harmonic space (h_i), and
    the image d(b_(i-1)); the torsion is the alternating product of the
    determinants of these combined bases against the standard one, with the
    1/|G| normalization.
    """
    alg = complex_.algebra
    if alg.torus_rank != 0:
        raise BadParams("dense torsion oracle requires the finite model")
    order = alg.order
    n = complex_.length
    dense = []
    for i in range(n - 1):
        if complex_.rank(i) and complex_.rank(i + 1):
            dense.append(_weighted_dense(complex_, i))
        else:
            dense.append(np.zeros((complex_.rank(i + 1) * order,
                                   complex_.rank(i) * order), dtype=complex))
    total = 0.0
    prev_image = None  # d(b_(i-1)) as columns
    for i in range(n):
        dim = complex_.rank(i) * order
        if dim == 0:
            prev_image = np.zeros((0, 0), dtype=complex)
            continue
        d_out = dense[i] if i < n - 1 else np.zeros((0, dim), dtype=complex)
        u, s, vh = np.linalg.svd(d_out) if min(d_out.shape) else \
            (np.zeros((d_out.shape[0], 0)), np.zeros(0), np.zeros((0, dim)))
        smax = float(s.max(initial=0.0))
        r = int((s > 1e-10 * smax).sum()) if smax > 0 else 0
        b_i = vh[:r].conj().T                      # complement of the kernel
        image_i = (u[:, :r] * s[:r])               # d(b_i), for the next degree
        # harmonic basis: kernel of the degree-i laplacian
        delta = np.zeros((dim, dim), dtype=complex)
        if min(d_out.shape):
            delta += d_out.conj().T @ d_out
        if prev_image is not None and prev_image.shape[0] == dim and prev_image.size:
            d_in = dense[i - 1]
            delta += d_in @ d_in.conj().T
        w, vecs = np.linalg.eigh(delta)
        wscale = float(w.max(initial=0.0))
        h_i = vecs[:, w < _EIG_CUT * wscale] if wscale > 0 else np.eye(dim)
        blocks = [blk for blk in
                  ((prev_image if prev_image is not None and prev_image.shape[0] == dim
                    else None), h_i, b_i)
                  if blk is not None and blk.size]
        basis = np.hstack(blocks) if blocks else np.zeros((dim, 0))
        if basis.shape != (dim, dim):
            raise BadParams("basis assembly failed at degree %d: %r" % (i, basis.shape))
        sign, logdet = np.linalg.slogdet(basis)
        if sign == 0:
            raise BadParams("degenerate combined basis at degree %d" % i)
        total += (-1) ** (i + 1) * logdet
        prev_image = image_i
    return total / order


def mahler_refine(poly: GroupRingElement, target_tol: float = 1e-8, *,
                  start: int = 128, max_resolution: int = 1 << 14) -> tuple:
    """log Mahler measure of a Laurent polynomial with an error bound.

    Midpoint-grid means of log|p| on doubling grids, Richardson-extrapolated
    with the model a + b/R.  Refuses to certify when the doubling residuals
    stop decreasing.  Returns (value, bound).
    """
    if poly.is_zero():
        raise BadParams("Mahler measure of the zero polynomial")
    alg = poly.algebra
    if alg.order != 1 or alg.torus_rank < 1:
        raise BadParams("mahler_refine expects a pure torus algebra element")
    k = alg.torus_rank
    if k >= 2:
        max_resolution = min(max_resolution, 1 << 12)
    sym = GroupRingMatrix.from_rows(alg, [[poly]]).symbol

    def mean_at(res: int) -> float:
        if res ** k <= 1 << 21:
            vals = np.abs(sym(_mesh(k, res))[:, 0, 0])
            vals = vals[vals > 0]
            return float(np.log(vals).sum()) / res ** k
        # chunk over the leading axis for large grids
        total = 0.0
        axis = 2.0 * np.pi * (np.arange(res) + 0.5) / res
        rest = _mesh(k - 1, res) if k > 1 else np.zeros((1, 0))
        for x in axis:
            block = np.hstack([np.full((rest.shape[0], 1), x), rest])
            vals = np.abs(sym(block)[:, 0, 0])
            vals = vals[vals > 0]
            total += float(np.log(vals).sum())
        return total / res ** k

    res = start
    values = [mean_at(res)]
    rich = []
    residuals = []
    bound = np.inf
    value = values[-1]
    while res < max_resolution:
        res *= 2
        values.append(mean_at(res))
        residuals.append(abs(values[-1] - values[-2]))
        rich.append(2 * values[-1] - values[-2])
        if len(rich) >= 2:
            delta = abs(rich[-1] - rich[-2])
            bound = 4.0 * delta + 1e-13 * (1.0 + abs(rich[-1]))
            value = rich[-1]
            if bound <= target_tol:
                return value, bound
    if len(residuals) >= 2 and residuals[-1] > residuals[-2] and bound > target_tol:
        raise NonConvergent("doubling residuals stopped decreasing: %r" % residuals[-3:])
    if bound > target_tol:
        raise NonConvergent("could not certify %.1e (reached bound %.1e at %d)"
                            % (target_tol, bound, res))
    return value, bound
