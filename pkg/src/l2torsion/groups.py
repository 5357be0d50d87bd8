"""Finite groups as multiplication tables with dense 0-based indexing.

The identity is always element 0.  Tables of order <= 64 are checked for
associativity exhaustively at construction; larger tables only get the
identity and inverse laws.
"""

from __future__ import annotations

import numpy as np

from .errors import BadParams


class FiniteGroupTable:
    """Multiplication table of a finite group on indices 0..order-1."""

    def __init__(self, mult, check: bool = True):
        table = np.asarray(mult, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise BadParams("multiplication table must be square")
        self.mult = table
        self.mult.setflags(write=False)
        self.order = table.shape[0]
        self.inverse = self._compute_inverses()
        if check:
            self.validate()

    def _compute_inverses(self) -> np.ndarray:
        inv = np.full(self.order, -1, dtype=np.int64)
        for g in range(self.order):
            hits = np.nonzero(self.mult[g] == 0)[0]
            if len(hits) != 1:
                raise BadParams("element %d has no unique inverse" % g)
            inv[g] = hits[0]
        inv.setflags(write=False)
        return inv

    def validate(self) -> None:
        n = self.order
        if self.mult.min() < 0 or self.mult.max() >= n:
            raise BadParams("table entries out of range")
        if not (np.all(self.mult[0] == np.arange(n)) and np.all(self.mult[:, 0] == np.arange(n))):
            raise BadParams("identity laws fail for element 0")
        for g in range(n):
            if self.mult[g, self.inverse[g]] != 0 or self.mult[self.inverse[g], g] != 0:
                raise BadParams("inverse laws fail for element %d" % g)
        if n <= 64:
            # (ab)c == a(bc), fully vectorized over b, c for each a
            for a in range(n):
                if not np.array_equal(self.mult[self.mult[a]], self.mult[a][self.mult]):
                    raise BadParams("table is not associative at element %d" % a)

    def mul(self, a: int, b: int) -> int:
        return int(self.mult[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.mult, self.mult.T))

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteGroupTable) and np.array_equal(self.mult, other.mult)

    def __hash__(self) -> int:
        return hash(self.mult.tobytes())

    def __repr__(self) -> str:
        return "FiniteGroupTable(order=%d)" % self.order


def trivial_group() -> FiniteGroupTable:
    return FiniteGroupTable([[0]])


def cyclic_group(n: int) -> FiniteGroupTable:
    if n < 1:
        raise BadParams("cyclic group order must be >= 1")
    idx = np.arange(n)
    return FiniteGroupTable((idx[:, None] + idx[None, :]) % n)


def dihedral_group(n: int) -> FiniteGroupTable:
    """Dihedral group of order 2n: rotations r^i are 0..n-1, reflections r^i s are n..2n-1."""
    if n < 1:
        raise BadParams("dihedral parameter must be >= 1")

    def mul(a, b):
        ia, fa = a % n, a // n
        ib, fb = b % n, b // n
        # (r^ia s^fa)(r^ib s^fb): s r^i = r^-i s
        i = (ia + (ib if fa == 0 else -ib)) % n
        return i + n * ((fa + fb) % 2)

    size = 2 * n
    return FiniteGroupTable([[mul(a, b) for b in range(size)] for a in range(size)])


def product_group(g1: FiniteGroupTable, g2: FiniteGroupTable) -> FiniteGroupTable:
    """Direct product; element (a, b) has index a * |G2| + b."""
    n1, n2 = g1.order, g2.order
    m = np.empty((n1 * n2, n1 * n2), dtype=np.int64)
    for a1 in range(n1):
        for b1 in range(n2):
            row = g1.mult[a1][:, None] * n2 + g2.mult[b1][None, :]
            m[a1 * n2 + b1] = row.reshape(-1)
    return FiniteGroupTable(m, check=False)


def heisenberg_group_mod(p: int) -> FiniteGroupTable:
    """Mod-p Heisenberg group: upper unitriangular 3x3 matrices over Z/p, order p^3.

    Element (a, b, c) has index a*p^2 + b*p + c, with
    (a,b,c)*(a',b',c') = (a+a', b+b', c+c'+a*b').
    """
    if p < 2:
        raise BadParams("heisenberg modulus must be >= 2")
    size = p ** 3

    def mul(x, y):
        a, r = divmod(x, p * p)
        b, c = divmod(r, p)
        a2, r2 = divmod(y, p * p)
        b2, c2 = divmod(r2, p)
        return ((a + a2) % p) * p * p + ((b + b2) % p) * p + ((c + c2 + a * b2) % p)

    return FiniteGroupTable([[mul(x, y) for y in range(size)] for x in range(size)],
                            check=(size <= 64))
