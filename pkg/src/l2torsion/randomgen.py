"""Seeded random constructions for property suites.

Random spaces are grown by elementary expansions at the chain level, which
keeps boundary exactness a construction invariant: a new k-cell is attached
along an existing cycle, and an expansion pair adds a k-cycle together with
a (k+1)-cell killing it.  Complexes built from expansion pairs alone are
chain contractible, hence weakly acyclic in every coefficient system.
"""

from __future__ import annotations

import numpy as np

from .algebra import GroupAlgebra, GroupRingMatrix, fk_det
from .complexes import CochainComplex
from .errors import ShapeMismatch
from .spaces import (ChainMap, EquivariantCWComplex, FiniteHandle,
                     IntegralElement, IntegralMatrix)


def random_element(alg: GroupAlgebra, rng, support: int = 2,
                   integer: bool = True, span: int = 2):
    terms = {}
    for _ in range(support):
        g = int(rng.integers(alg.order))
        exps = tuple(int(e) for e in rng.integers(-1, 2, size=alg.torus_rank))
        if integer:
            c = int(rng.integers(-span, span + 1))
        else:
            c = complex(rng.standard_normal(), rng.standard_normal())
        terms[(g, exps)] = terms.get((g, exps), 0) + c
    return alg.element(terms)


def random_matrix(alg: GroupAlgebra, rng, rows: int, cols: int,
                  support: int = 2, integer: bool = True) -> GroupRingMatrix:
    return GroupRingMatrix(alg, rows, cols,
                           {(i, j): random_element(alg, rng, support, integer)
                            for i in range(rows) for j in range(cols)})


def random_invertible_matrix(alg: GroupAlgebra, rng, n: int,
                             max_tries: int = 50) -> GroupRingMatrix:
    """Random group-ring matrix whose realization is comfortably invertible."""
    for _ in range(max_tries):
        m = random_matrix(alg, rng, n, n) + GroupRingMatrix.scalar(
            alg, n, float(rng.integers(2, 5)))
        res = fk_det(m, strict=False)
        if res.invertible and res.smin > 1e-3:
            return m
    raise ShapeMismatch("failed to draw an invertible matrix")


# ---------------------------------------------------------------------------
# random complexes (algebra level)


class _GrowingComplex:
    """Chain-level complex grown cell by cell with exact boundaries."""

    def __init__(self, handle: FiniteHandle, degrees: int):
        self.handle = handle
        self.degrees = degrees
        self.cells = [0] * degrees
        self.columns = [[] for _ in range(degrees)]  # per degree: boundary columns
        self.cycles = [[] for _ in range(degrees)]   # known cycle columns per degree

    def _zero_column(self, k):
        return {}

    def add_cycle_cell(self, k, rng, attach_cycles: bool = True):
        """New k-cell whose boundary is a combination of known (k-1)-cycles."""
        col = {}
        if attach_cycles and k >= 1 and self.cycles[k - 1] and rng.random() < 0.7:
            picks = rng.integers(0, len(self.cycles[k - 1]),
                                 size=int(rng.integers(1, 3)))
            for p in picks:
                g = int(rng.integers(self.handle.table.order))
                sign = int(rng.choice([-1, 1]))
                for row, v in self.cycles[k - 1][p].items():
                    moved = v.translate(g) * sign
                    col[row] = col.get(row, IntegralElement(self.handle)) + moved
            col = {r: v for r, v in col.items() if not v.is_zero()}
        idx = self.cells[k]
        self.cells[k] += 1
        self.columns[k].append(col)
        if not col:
            # the new cell is itself a cycle
            self.cycles[k].append({idx: IntegralElement.unit(self.handle)})
        elif k >= 1:
            # its boundary is a cycle one degree down
            self.cycles[k - 1].append(dict(col))
        return idx

    def add_expansion_pair(self, k, rng):
        """A k-cell with zero boundary plus a (k+1)-cell killing it."""
        base = self.add_cycle_cell(k, rng, attach_cycles=False)
        g = int(rng.integers(self.handle.table.order))
        sign = int(rng.choice([-1, 1]))
        col = {base: IntegralElement(self.handle, {g: sign})}
        if self.cycles[k] and rng.random() < 0.5:
            extra = self.cycles[k][int(rng.integers(len(self.cycles[k])))]
            if base not in extra:
                g2 = int(rng.integers(self.handle.table.order))
                for row, v in extra.items():
                    moved = v.translate(g2)
                    col[row] = col.get(row, IntegralElement(self.handle)) + moved
        self.cells[k + 1] += 1
        self.columns[k + 1].append({r: v for r, v in col.items() if not v.is_zero()})
        self.cycles[k].append(dict(col))

    def build(self, label: str) -> EquivariantCWComplex:
        boundaries = []
        for k in range(self.degrees - 1):
            entries = {}
            for j, col in enumerate(self.columns[k + 1]):
                for row, v in col.items():
                    entries[(row, j)] = v
            boundaries.append(IntegralMatrix(self.handle, self.cells[k],
                                             self.cells[k + 1], entries))
        x = EquivariantCWComplex(self.handle, list(self.cells), boundaries, label)
        x.validate_boundaries()
        return x


def random_space(handle: FiniteHandle, rng, degrees: int = 3,
                 pairs: int = 3, free_cells: int = 1, seed_vertex: bool = True,
                 label: str = "R") -> EquivariantCWComplex:
    g = _GrowingComplex(handle, degrees)
    if seed_vertex:
        g.add_cycle_cell(0, rng, attach_cycles=False)
    for _ in range(max(pairs, 0 if seed_vertex else 1)):
        k = int(rng.integers(0, degrees - 1))
        g.add_expansion_pair(k, rng)
    for _ in range(free_cells):
        k = int(rng.integers(0, degrees))
        g.add_cycle_cell(k, rng)
    return g.build(label)


def extend_space(x: EquivariantCWComplex, rng, pairs: int = 2,
                 free_cells: int = 1, label: str = "E") -> EquivariantCWComplex:
    """Grow a space by further expansions; the input stays a subcomplex
    (its cells keep their indices and boundaries)."""
    g = _GrowingComplex(x.group, len(x.cells))
    g.cells = list(x.cells)
    for k in range(len(x.cells)):
        g.columns[k] = []
        for j in range(x.cells[k]):
            col = {}
            b = x.boundary(k - 1)
            if k >= 1 and b is not None:
                for (r, c), v in b.entries.items():
                    if c == j:
                        col[r] = v
            g.columns[k].append(col)
            if not col:
                g.cycles[k].append({j: IntegralElement.unit(x.group)})
            elif k >= 1:
                g.cycles[k - 1].append(dict(col))
    for _ in range(pairs):
        k = int(rng.integers(0, len(x.cells) - 1))
        g.add_expansion_pair(k, rng)
    for _ in range(free_cells):
        k = int(rng.integers(0, len(x.cells)))
        g.add_cycle_cell(k, rng)
    return g.build(label)


def subcomplex_inclusion(x: EquivariantCWComplex,
                         y: EquivariantCWComplex) -> ChainMap:
    """Inclusion of x into an extend_space output y."""
    mats = []
    for k in range(len(x.cells)):
        mats.append(IntegralMatrix(x.group, y.cells[k], x.cells[k],
                                   {(i, i): IntegralElement.unit(x.group)
                                    for i in range(x.cells[k])}))
    cm = ChainMap(x, y, mats)
    cm.check_chain_map()
    return cm


def translated_inclusion(x: EquivariantCWComplex, y: EquivariantCWComplex,
                         rng) -> ChainMap:
    """Inclusion with random per-cell translations (abelian handles), the
    computational content of changing cell lifts."""
    if not x.group.table.is_abelian():
        return subcomplex_inclusion(x, y)
    mats = []
    for k in range(len(x.cells)):
        entries = {}
        for i in range(x.cells[k]):
            g = int(rng.integers(x.group.table.order))
            entries[(i, i)] = IntegralElement(x.group, {g: 1})
        mats.append(IntegralMatrix(x.group, y.cells[k], x.cells[k], entries))
    cm = ChainMap(x, y, mats)
    try:
        cm.check_chain_map()
        return cm
    except Exception:
        return subcomplex_inclusion(x, y)


def random_weakly_acyclic_complex(alg: GroupAlgebra, rng, degrees: int = 3,
                                  pairs: int = 3) -> CochainComplex:
    """Cochain complex over a finite model that is weakly acyclic by
    construction (chain contractible expansions)."""
    handle = FiniteHandle(alg.group)
    from .spaces import CoefficientSystem, cochain_with_coefficients
    x = random_space(handle, rng, degrees=degrees, pairs=max(pairs, 1),
                     free_cells=0, seed_vertex=False)
    h = CoefficientSystem.regular(handle)
    return cochain_with_coefficients(x, h, validate_hom=False)


def random_det_class_complex(alg: GroupAlgebra, rng, degrees: int = 3,
                             pairs: int = 2, free_cells: int = 1) -> CochainComplex:
    handle = FiniteHandle(alg.group)
    from .spaces import CoefficientSystem, cochain_with_coefficients
    x = random_space(handle, rng, degrees=degrees, pairs=pairs,
                     free_cells=free_cells)
    h = CoefficientSystem.regular(handle)
    return cochain_with_coefficients(x, h, validate_hom=False)
