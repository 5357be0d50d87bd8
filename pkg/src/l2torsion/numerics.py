"""Numerical kernels: dense spectral helpers and torus grid quadrature.

Grid quadrature uses midpoint tensor grids (points 2*pi*(j+1/2)/R), which
avoid hitting zero sets of integer symbols at lattice points, followed by
Richardson extrapolation on the doubling sequence with the error model
a + b/R.  For symbols without zeros on the torus the raw values already
converge exponentially and the extrapolation is inert.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditioned, NotPositive

# Relative singular-value cutoff separating true kernels from round-off,
# and the gray zone in which rank decisions are refused.
DEFAULT_EPS_REL = 1e-10
GRAY_LO = 0.1
GRAY_HI = 10.0

DEFAULT_LADDER = (1e-4, 1e-6, 1e-8)


# ---------------------------------------------------------------------------
# dense (finite-model) helpers


@dataclass
class DenseDetInfo:
    log_det: float
    smin: float
    smax: float
    kernel_count: int


def dense_log_det_prime(mat: np.ndarray, eps_rel: float = DEFAULT_EPS_REL,
                        trace_order: int = 1) -> DenseDetInfo:
    """log Det' of a dense matrix: trace-normalized sum of log of nonzero
    singular values.  Det' of an empty or zero matrix is 1."""
    mat = np.atleast_2d(mat)
    if mat.size == 0 or min(mat.shape) == 0:
        return DenseDetInfo(0.0, np.inf, 0.0, 0)
    s = np.linalg.svd(mat, compute_uv=False)
    smax = float(s.max())
    if smax == 0.0:
        return DenseDetInfo(0.0, 0.0, 0.0, len(s))
    cut = eps_rel * smax
    keep = s > cut
    log_det = float(np.log(s[keep]).sum()) / trace_order
    return DenseDetInfo(log_det, float(s.min()), smax, int((~keep).sum()))


def dense_rank(mat: np.ndarray, eps_rel: float = DEFAULT_EPS_REL,
               guard: bool = True) -> int:
    """Numerical rank with a gray-zone guard: refuses to classify singular
    values within [GRAY_LO*cut, GRAY_HI*cut]."""
    mat = np.atleast_2d(mat)
    if mat.size == 0 or min(mat.shape) == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    smax = float(s.max())
    if smax == 0.0:
        return 0
    cut = eps_rel * smax
    if guard:
        gray = (s >= GRAY_LO * cut) & (s <= GRAY_HI * cut)
        if gray.any():
            raise IllConditioned(
                "singular value %.3e inside gray zone around cutoff %.3e"
                % (float(s[gray][0]), cut))
    return int((s > cut).sum())


def dense_kernel_basis(hermitian_psd: np.ndarray, eps_rel: float = DEFAULT_EPS_REL,
                       guard: bool = True) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of a PSD hermitian matrix.

    The cutoff lives on the eigenvalue scale (squared singular values), so
    eps_rel is squared relative to the top eigenvalue, floored at machine
    noise.
    """
    h = np.atleast_2d(hermitian_psd)
    n = h.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    w, v = np.linalg.eigh(h)
    scale = max(float(w.max()), 0.0)
    if scale == 0.0:
        return np.eye(n, dtype=complex)
    cut = max(eps_rel * scale, 1e-13 * scale)
    if guard:
        gray = (w >= GRAY_LO * cut) & (w <= GRAY_HI * cut)
        if gray.any():
            raise IllConditioned(
                "eigenvalue %.3e inside gray zone around cutoff %.3e"
                % (float(w[gray][0]), cut))
    return np.ascontiguousarray(v[:, w < cut])


def dense_pos_power(mat: np.ndarray, power: float) -> np.ndarray:
    """mat**power for a positive definite hermitian matrix, via eigh."""
    w, v = np.linalg.eigh(mat)
    if w.min() <= 0:
        raise NotPositive("matrix is not positive definite (min eig %.3e)" % w.min())
    return (v * (w ** power)) @ v.conj().T


def batched_pos_power(mats: np.ndarray, power: float) -> np.ndarray:
    """Batched mat**power for stacks of positive definite hermitian matrices."""
    w, v = np.linalg.eigh(mats)
    if w.min() <= 0:
        raise NotPositive("batched matrix not positive definite (min eig %.3e)" % w.min())
    return np.einsum("pij,pj,pkj->pik", v, w ** power, v.conj())


# ---------------------------------------------------------------------------
# torus grids


def grid_chunks(torus_rank: int, resolution: int, chunk: int = 1 << 16):
    """Yield (P, k) arrays of midpoint grid angles covering the tensor grid."""
    total = resolution ** torus_rank
    step = 2.0 * np.pi / resolution
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        flat = np.arange(lo, hi, dtype=np.int64)
        digits = np.empty((hi - lo, torus_rank), dtype=np.float64)
        rem = flat
        for axis in range(torus_rank - 1, -1, -1):
            rem, d = np.divmod(rem, resolution)
            digits[:, axis] = d
        yield (digits + 0.5) * step


@dataclass
class ProviderStats:
    log_det: dict  # eps -> accumulated value at the current resolution
    smin: float = np.inf
    smax: float = 0.0


@dataclass
class QuadratureResult:
    value: float
    converged: bool
    det_class: bool
    resolution: int
    per_provider: list  # value per provider at finest eps, final resolution
    ladder_delta: float
    richardson_history: list = field(default_factory=list)
    raw_history: list = field(default_factory=list)
    per_provider_history: list = field(default_factory=list)  # (res, [values])
    smin: list = field(default_factory=list)  # per provider, final resolution
    smin_previous: list = field(default_factory=list)

    def per_provider_richardson_delta(self) -> list:
        """Stability of each provider's own extrapolated value; a loose
        per-degree determinant-class indicator."""
        if len(self.per_provider_history) < 3:
            return [np.inf] * len(self.per_provider)
        out = []
        for j in range(len(self.per_provider)):
            vals = [vals_at_res[j] for _, vals_at_res in self.per_provider_history]
            rich = [2.0 * vals[i] - vals[i - 1] for i in range(1, len(vals))]
            out.append(abs(rich[-1] - rich[-2]))
        return out


def _pass_at_resolution(providers, signs, torus_rank, resolution, scales,
                        ladder, trace_order, chunk):
    stats = [ProviderStats({eps: 0.0 for eps in ladder}) for _ in providers]
    npoints = resolution ** torus_rank
    for thetas in grid_chunks(torus_rank, resolution, chunk):
        for idx, provider in enumerate(providers):
            mats = provider(thetas)
            if mats.size == 0 or min(mats.shape[1:]) == 0:
                continue
            s = np.linalg.svd(mats, compute_uv=False)
            st = stats[idx]
            st.smin = min(st.smin, float(s.min()))
            st.smax = max(st.smax, float(s.max()))
            logs = np.log(np.maximum(s, 1e-300))
            for eps in ladder:
                cut = eps * scales[idx]
                st.log_det[eps] += float(logs[s > cut].sum())
    for st in stats:
        for eps in ladder:
            st.log_det[eps] /= npoints * trace_order
    return stats


def torus_log_det_sum(providers, signs, torus_rank: int, trace_order: int = 1, *,
                      start: int = 256, tol: float = 1e-8,
                      ladder=DEFAULT_LADDER, max_points: int = 1 << 21,
                      chunk: int = 1 << 16) -> QuadratureResult:
    """Signed sum of log Det' over a family of torus symbols.

    All providers are evaluated on the same grids so that systematic
    quadrature errors shared between degrees of a complex cancel in the
    alternating sum.
    """
    ladder = tuple(sorted(ladder, reverse=True))
    eps_fine = ladder[-1]
    if torus_rank >= 3:
        start = min(start, 64)
    schedule = []
    r = start
    while r ** torus_rank <= max_points:
        schedule.append(r)
        r *= 2
    if len(schedule) < 3:
        schedule = [start, 2 * start, 4 * start]

    # provisional scales from a coarse pre-pass
    pre = _pass_at_resolution(providers, signs, torus_rank, min(start, 32),
                              [np.inf] * len(providers), (np.inf,), trace_order, chunk)
    scales = [st.smax if st.smax > 0 else 1.0 for st in pre]

    raw = []          # (resolution, total at eps_fine, stats)
    per_provider_history = []
    richardson = []
    result = None
    for res in schedule:
        stats = _pass_at_resolution(providers, signs, torus_rank, res, scales,
                                    ladder, trace_order, chunk)
        total = {eps: sum(sg * st.log_det[eps] for sg, st in zip(signs, stats))
                 for eps in ladder}
        raw.append((res, total[eps_fine], stats))
        per_provider_history.append((res, [st.log_det[eps_fine] for st in stats]))
        if len(raw) >= 2:
            v_prev, v_cur = raw[-2][1], raw[-1][1]
            richardson.append(2.0 * v_cur - v_prev)
            # exactly cancelling sums converge at the first doubling
            if len(raw) == 2 and abs(v_cur - v_prev) < 0.125 * tol:
                result = richardson[-1]
                break
        if len(richardson) >= 2 and abs(richardson[-1] - richardson[-2]) < 0.5 * tol:
            result = richardson[-1]
            break

    converged = result is not None
    if result is None:
        result = richardson[-1] if richardson else raw[-1][1]
    final_res, _, final_stats = raw[-1]
    totals_final = {eps: sum(sg * st.log_det[eps] for sg, st in zip(signs, final_stats))
                    for eps in ladder}
    ladder_delta = (abs(totals_final[ladder[-2]] - totals_final[eps_fine])
                    if len(ladder) >= 2 else 0.0)
    det_class = converged and ladder_delta <= max(100.0 * tol, 1e-6)
    prev_stats = raw[-2][2] if len(raw) >= 2 else final_stats
    return QuadratureResult(
        value=float(result),
        converged=converged,
        det_class=det_class,
        resolution=final_res,
        per_provider=[st.log_det[eps_fine] for st in final_stats],
        ladder_delta=ladder_delta,
        richardson_history=richardson,
        raw_history=[(res, val) for res, val, _ in raw],
        per_provider_history=per_provider_history,
        smin=[st.smin for st in final_stats],
        smin_previous=[st.smin for st in prev_stats],
    )


def torus_kernel_dimension(provider, torus_rank: int, trace_order: int = 1, *,
                           resolution: int = 256, eps_rel: float = 1e-8,
                           chunk: int = 1 << 16) -> float:
    """Average kernel dimension of a hermitian PSD symbol over the grid,
    normalized by the trace order.  This is the von Neumann dimension of
    the kernel for fields of operators continuous in theta."""
    if torus_rank >= 3:
        resolution = min(resolution, 64)
    eigs = []
    for thetas in grid_chunks(torus_rank, resolution, chunk):
        mats = provider(thetas)
        if mats.size == 0 or min(mats.shape[1:]) == 0:
            return 0.0
        eigs.append(np.linalg.eigvalsh(mats))
    w = np.concatenate(eigs, axis=0)
    scale = float(w.max())
    if scale <= 0.0:
        return w.shape[1] / trace_order
    cut = max(eps_rel * scale, 1e-13 * scale)
    counts = (w < cut).sum(axis=1)
    return float(counts.mean()) / trace_order
