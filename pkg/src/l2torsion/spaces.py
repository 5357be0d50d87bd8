"""Equivariant CW complexes as integral group-ring chain data.

Chain modules are free left ZPi-modules on the equivariant cells.  A
boundary matrix for degree k+1 has shape (#cells_k, #cells_(k+1)); column c'
lists the coefficients of the (k+1)-cell c' on the k-cells.  For maps of
left modules written this way, composition multiplies the coefficients of
the map applied FIRST on the left:

    (second after first)[r, c] = sum_m first[m, c] * second[r, m]

With that convention the Fox fundamental identity makes presentation
complexes exact on the nose, and the induced cochain differential with
coefficients in a bimodule H is the plain transpose of the boundary matrix
with the homomorphism applied entrywise; d^2 = 0 then follows from
boundary exactness by ordinary matrix multiplication over the target
algebra.

Group handles: finite tables, free abelian groups, finitely presented
groups (whose elements are freely reduced words, with equality only
decidable after mapping to a quotient), and binary products.  Finitely
presented handles exist purely as sources of homomorphisms; no analysis is
attempted in the group itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import GroupAlgebra, GroupRingElement, GroupRingMatrix, fk_det
from .complexes import CochainComplex, torsion, validate
from .errors import (BadParams, HomomorphismInvalid, NotCellular, NotComplex,
                     NotSubcomplex, NotUnimodular, ShapeMismatch, UnknownSpace)
from .groups import (FiniteGroupTable, cyclic_group, dihedral_group,
                     heisenberg_group_mod, trivial_group)

# ---------------------------------------------------------------------------
# group handles


class GroupHandle:
    kind = "abstract"

    def identity(self):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def decidable(self) -> bool:
        """Whether element equality is decidable inside the handle."""
        return True


@dataclass(frozen=True)
class FiniteHandle(GroupHandle):
    table: FiniteGroupTable
    kind = "finite"

    def identity(self):
        return 0

    def mul(self, a, b):
        return self.table.mul(a, b)

    def inv(self, a):
        return self.table.inv(a)


@dataclass(frozen=True)
class FreeAbelianHandle(GroupHandle):
    rank: int
    kind = "free_abelian"

    def identity(self):
        return (0,) * self.rank

    def mul(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inv(self, a):
        return tuple(-x for x in a)

    def generator(self, axis: int):
        return tuple(1 if i == axis else 0 for i in range(self.rank))


def reduce_word(word) -> tuple:
    out = []
    for letter in word:
        if letter == 0:
            raise BadParams("letters are nonzero signed generator indices")
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


@dataclass(frozen=True)
class PresentedHandle(GroupHandle):
    """Finitely presented group; elements are freely reduced words, so
    equality is only a sufficient test.  Used as a source of homomorphisms."""
    n_generators: int
    relators: tuple
    name: str = "presented"
    kind = "presented"

    def identity(self):
        return ()

    def mul(self, a, b):
        return reduce_word(tuple(a) + tuple(b))

    def inv(self, a):
        return tuple(-x for x in reversed(a))

    def generator(self, i: int):
        return (i + 1,)

    def decidable(self) -> bool:
        return False


@dataclass(frozen=True)
class ProductHandle(GroupHandle):
    left: GroupHandle
    right: GroupHandle
    kind = "product"

    def identity(self):
        return (self.left.identity(), self.right.identity())

    def mul(self, a, b):
        return (self.left.mul(a[0], b[0]), self.right.mul(a[1], b[1]))

    def inv(self, a):
        return (self.left.inv(a[0]), self.right.inv(a[1]))

    def decidable(self) -> bool:
        return self.left.decidable() and self.right.decidable()


def trivial_handle() -> FiniteHandle:
    return FiniteHandle(trivial_group())


def is_trivial_handle(h: GroupHandle) -> bool:
    return isinstance(h, FiniteHandle) and h.table.order == 1


# ---------------------------------------------------------------------------
# integral group ring matrices (chain data)


class IntegralElement:
    """Finitely supported integer combination of handle elements."""

    __slots__ = ("handle", "terms")

    def __init__(self, handle: GroupHandle, terms=None):
        self.handle = handle
        self.terms = {}
        for key, coeff in dict(terms or {}).items():
            c = int(coeff)
            if c:
                self.terms[key] = self.terms.get(key, 0) + c
        self.terms = {k: c for k, c in self.terms.items() if c}

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return IntegralElement(self.handle, out)

    def __neg__(self):
        return IntegralElement(self.handle, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return IntegralElement(self.handle,
                                   {k: c * other for k, c in self.terms.items()})
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = self.handle.mul(k1, k2)
                out[k] = out.get(k, 0) + c1 * c2
        return IntegralElement(self.handle, out)

    def star(self):
        return IntegralElement(self.handle,
                               {self.handle.inv(k): c for k, c in self.terms.items()})

    def translate(self, g):
        """Left translation by a single handle element."""
        return IntegralElement(self.handle,
                               {self.handle.mul(g, k): c for k, c in self.terms.items()})

    @staticmethod
    def unit(handle, key=None, coeff=1):
        if key is None:
            key = handle.identity()
        return IntegralElement(handle, {key: coeff})

    def __repr__(self):
        return "IntegralElement(%r)" % (self.terms,)


class IntegralMatrix:
    """Sparse matrix of IntegralElement coefficients for left-module maps."""

    def __init__(self, handle: GroupHandle, rows: int, cols: int, entries=None):
        self.handle = handle
        self.rows = rows
        self.cols = cols
        self.entries = {}
        for (i, j), v in (entries or {}).items():
            if not (0 <= i < rows and 0 <= j < cols):
                raise ShapeMismatch("entry (%d, %d) out of range" % (i, j))
            if isinstance(v, int):
                v = IntegralElement.unit(handle, coeff=v)
            if not v.is_zero():
                self.entries[(i, j)] = v

    @classmethod
    def zeros(cls, handle, rows, cols):
        return cls(handle, rows, cols)

    @classmethod
    def identity(cls, handle, n):
        return cls(handle, n, n,
                   {(i, i): IntegralElement.unit(handle) for i in range(n)})

    def entry(self, i, j) -> IntegralElement:
        return self.entries.get((i, j), IntegralElement(self.handle))

    def __add__(self, other):
        out = dict(self.entries)
        for key, v in other.entries.items():
            out[key] = out[key] + v if key in out else v
        return IntegralMatrix(self.handle, self.rows, self.cols, out)

    def __neg__(self):
        return IntegralMatrix(self.handle, self.rows, self.cols,
                              {k: -v for k, v in self.entries.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c: int):
        return IntegralMatrix(self.handle, self.rows, self.cols,
                              {k: v * c for k, v in self.entries.items()})

    def is_zero(self) -> bool:
        return not self.entries


def compose_chain(second: IntegralMatrix, first: IntegralMatrix) -> IntegralMatrix:
    """Composite of left-module maps: (second o first)[r, c] =
    sum_m first[m, c] * second[r, m]."""
    if first.rows != second.cols:
        raise ShapeMismatch("chain map shapes do not compose")
    out = {}
    by_col = {}
    for (m, c), v in first.entries.items():
        by_col.setdefault(m, []).append((c, v))
    for (r, m), w in second.entries.items():
        for c, v in by_col.get(m, ()):
            key = (r, c)
            prod = v * w
            out[key] = out[key] + prod if key in out else prod
    return IntegralMatrix(second.handle, second.rows, first.cols, out)


# ---------------------------------------------------------------------------
# Fox derivatives (presentation complexes)


def fox_derivative(handle: PresentedHandle, word, generator: int) -> IntegralElement:
    """Free Fox derivative d(word)/d(x_generator), generator is 1-based."""
    out = IntegralElement(handle)
    prefix = ()
    for letter in word:
        g = abs(letter)
        if letter == generator:
            out = out + IntegralElement(handle, {reduce_word(prefix): 1})
        elif letter == -generator:
            step = reduce_word(prefix + (letter,))
            out = out - IntegralElement(handle, {step: 1})
        prefix = reduce_word(prefix + (letter,))
    return out


# ---------------------------------------------------------------------------
# CW complexes


@dataclass
class EquivariantCWComplex:
    group: GroupHandle
    cells: list            # number of equivariant cells per degree
    boundaries: list       # boundaries[k]: IntegralMatrix (#cells_k x #cells_(k+1))
    label: str = "X"

    def __post_init__(self):
        if len(self.boundaries) != max(len(self.cells) - 1, 0):
            raise ShapeMismatch("need one boundary matrix per adjacent degree pair")
        for k, b in enumerate(self.boundaries):
            if b.rows != self.cells[k] or b.cols != self.cells[k + 1]:
                raise ShapeMismatch("boundary %d has shape (%d, %d), expected (%d, %d)"
                                    % (k, b.rows, b.cols, self.cells[k], self.cells[k + 1]))

    @property
    def dimension(self) -> int:
        return len(self.cells) - 1

    def boundary(self, k: int) -> IntegralMatrix | None:
        if 0 <= k < len(self.boundaries):
            return self.boundaries[k]
        return None

    def validate_boundaries(self) -> bool:
        """Exact dd = 0 where the handle is decidable; returns False when the
        check was deferred (presented handles validate after a homomorphism)."""
        if not self.group.decidable():
            return False
        for k in range(len(self.boundaries) - 1):
            comp = compose_chain(self.boundaries[k], self.boundaries[k + 1])
            if not comp.is_zero():
                raise NotComplex("boundary composition nonzero at degree %d" % k)
        return True


def euler_char(x: EquivariantCWComplex) -> int:
    return sum((-1) ** k * c for k, c in enumerate(x.cells))


# ---------------------------------------------------------------------------
# coefficient systems


class CoefficientSystem:
    """Unimodular bimodule data: a homomorphism from the handle into the
    group of a target algebra, acting on H = l2(target) of rank 1."""

    module_rank = 1  # von Neumann dimension of the induced bimodule

    def __init__(self, handle: GroupHandle, algebra: GroupAlgebra, images,
                 label: str = "H"):
        self.handle = handle
        self.algebra = algebra
        self.label = label
        self.images = images  # kind-dependent; see image_of_key
        self._children = None
        if handle.kind == "product":
            if not (isinstance(images, (tuple, list)) and len(images) == 2
                    and all(isinstance(i, CoefficientSystem) for i in images)):
                raise HomomorphismInvalid("product handle needs a pair of systems")
            self._children = tuple(images)

    # -- construction helpers --------------------------------------------------

    @staticmethod
    def finite(handle: FiniteHandle, algebra: GroupAlgebra, element_images,
               label: str = "H") -> "CoefficientSystem":
        """images: one algebra element per group element index."""
        if len(element_images) != handle.table.order:
            raise HomomorphismInvalid("need an image per group element")
        return CoefficientSystem(handle, algebra, list(element_images), label)

    @staticmethod
    def abelian(handle: FreeAbelianHandle, algebra: GroupAlgebra,
                generator_images, label: str = "H") -> "CoefficientSystem":
        if len(generator_images) != handle.rank:
            raise HomomorphismInvalid("need an image per free generator")
        return CoefficientSystem(handle, algebra, list(generator_images), label)

    @staticmethod
    def presented(handle: PresentedHandle, algebra: GroupAlgebra,
                  generator_images, label: str = "H") -> "CoefficientSystem":
        if len(generator_images) != handle.n_generators:
            raise HomomorphismInvalid("need an image per generator")
        return CoefficientSystem(handle, algebra, list(generator_images), label)

    @staticmethod
    def product(c1: "CoefficientSystem", c2: "CoefficientSystem",
                label: str | None = None) -> "CoefficientSystem":
        handle = ProductHandle(c1.handle, c2.handle)
        alg = c1.algebra.tensor(c2.algebra)
        return CoefficientSystem(handle, alg, (c1, c2),
                                 label or "%s(x)%s" % (c1.label, c2.label))

    @staticmethod
    def regular(handle: GroupHandle, label: str = "l2") -> "CoefficientSystem":
        """The natural system: identity map onto the handle's own algebra
        (finite table or free abelian)."""
        if isinstance(handle, FiniteHandle):
            alg = GroupAlgebra(handle.table)
            return CoefficientSystem.finite(
                handle, alg, [alg.group_element(g) for g in range(handle.table.order)],
                label)
        if isinstance(handle, FreeAbelianHandle):
            alg = GroupAlgebra(torus_rank=handle.rank)
            return CoefficientSystem.abelian(
                handle, alg, [alg.torus_generator(i) for i in range(handle.rank)],
                label)
        if isinstance(handle, ProductHandle):
            return CoefficientSystem.product(CoefficientSystem.regular(handle.left),
                                             CoefficientSystem.regular(handle.right),
                                             label)
        raise HomomorphismInvalid("no natural system for handle kind %r" % handle.kind)

    @staticmethod
    def trivial(handle: GroupHandle, label: str = "C") -> "CoefficientSystem":
        """Everything maps to 1 in the one-dimensional algebra."""
        alg = GroupAlgebra(trivial_group())
        if isinstance(handle, FiniteHandle):
            return CoefficientSystem.finite(handle, alg,
                                            [alg.one()] * handle.table.order, label)
        if isinstance(handle, FreeAbelianHandle):
            return CoefficientSystem.abelian(handle, alg, [alg.one()] * handle.rank,
                                             label)
        if isinstance(handle, PresentedHandle):
            return CoefficientSystem.presented(handle, alg,
                                               [alg.one()] * handle.n_generators, label)
        if isinstance(handle, ProductHandle):
            return CoefficientSystem.product(CoefficientSystem.trivial(handle.left),
                                             CoefficientSystem.trivial(handle.right),
                                             label)
        raise HomomorphismInvalid("unsupported handle kind %r" % handle.kind)

    # -- evaluation --------------------------------------------------------------

    def image_of_key(self, key) -> GroupRingElement:
        kind = self.handle.kind
        if kind == "finite":
            return self.images[key]
        if kind == "free_abelian":
            out = self.algebra.one()
            for axis, power in enumerate(key):
                base = self.images[axis]
                out = out * _element_power(base, power)
            return out
        if kind == "presented":
            out = self.algebra.one()
            for letter in key:
                base = self.images[abs(letter) - 1]
                out = out * (base if letter > 0 else _element_inverse_monomial(base))
            return out
        if kind == "product":
            c1, c2 = self._children
            e1 = c1.image_of_key(key[0])
            e2 = c2.image_of_key(key[1])
            terms = {}
            for k1, v1 in e1.terms.items():
                for k2, v2 in e2.terms.items():
                    k = c1.algebra.combine_keys(c2.algebra, k1, k2)
                    terms[k] = terms.get(k, 0.0) + v1 * v2
            return self.algebra.element(terms)
        raise HomomorphismInvalid("unsupported handle kind %r" % kind)

    def image_of_element(self, elt: IntegralElement) -> GroupRingElement:
        out = self.algebra.zero()
        for key, coeff in elt.terms.items():
            out = out + self.image_of_key(key) * coeff
        return out

    def image_of_matrix(self, mat: IntegralMatrix) -> GroupRingMatrix:
        entries = {}
        for pos, v in mat.entries.items():
            entries[pos] = self.image_of_element(v)
        return GroupRingMatrix(self.algebra, mat.rows, mat.cols, entries)

    def generator_images(self) -> list:
        kind = self.handle.kind
        if kind == "finite":
            return [(str(g), self.images[g]) for g in range(1, self.handle.table.order)]
        if kind == "free_abelian":
            return [("t%d" % i, self.images[i]) for i in range(self.handle.rank)]
        if kind == "presented":
            return [("x%d" % (i + 1), self.images[i])
                    for i in range(self.handle.n_generators)]
        if kind == "product":
            c1, c2 = self._children
            out = []
            for name, img in c1.generator_images():
                out.append(("l." + name, _embed_left(img, c1, c2, self.algebra)))
            for name, img in c2.generator_images():
                out.append(("r." + name, _embed_right(img, c1, c2, self.algebra)))
            return out
        raise HomomorphismInvalid("unsupported handle kind %r" % kind)

    def validate(self, tol: float = 1e-10) -> None:
        """Check that the images respect the group structure."""
        kind = self.handle.kind
        if kind == "finite":
            table = self.handle.table
            ident = self.images[0] - self.algebra.one()
            if _element_sup(ident) > tol:
                raise HomomorphismInvalid("identity does not map to 1")
            for a in range(table.order):
                for b in range(table.order):
                    defect = self.images[a] * self.images[b] \
                        - self.images[table.mul(a, b)]
                    if _element_sup(defect) > tol:
                        raise HomomorphismInvalid(
                            "images fail multiplicativity at (%d, %d)" % (a, b))
        elif kind == "free_abelian":
            for i in range(len(self.images)):
                for j in range(i):
                    defect = self.images[i] * self.images[j] \
                        - self.images[j] * self.images[i]
                    if _element_sup(defect) > tol:
                        raise HomomorphismInvalid("images do not commute")
                inv = _element_inverse_monomial(self.images[i])
                defect = self.images[i] * inv - self.algebra.one()
                if _element_sup(defect) > tol:
                    raise HomomorphismInvalid("image %d is not invertible" % i)
        elif kind == "presented":
            for rel in self.handle.relators:
                defect = self.image_of_key(tuple(rel)) - self.algebra.one()
                if _element_sup(defect) > tol:
                    raise HomomorphismInvalid("relator %r does not map to 1" % (rel,))
        elif kind == "product":
            for child in self._children:
                child.validate(tol)

    def standard_module_label(self) -> str:
        return self.label


def _element_sup(e: GroupRingElement) -> float:
    return max((abs(c) for c in e.terms.values()), default=0.0)


def _element_inverse_monomial(e: GroupRingElement) -> GroupRingElement:
    if len(e.terms) != 1:
        raise HomomorphismInvalid("inverse requires a monomial image")
    (key, coeff), = e.terms.items()
    inv_key = e.algebra.inv_key(key)
    return e.algebra.element({inv_key: 1.0 / coeff})


def _element_power(e: GroupRingElement, n: int) -> GroupRingElement:
    if n == 0:
        return e.algebra.one()
    base = e if n > 0 else _element_inverse_monomial(e)
    out = base
    for _ in range(abs(n) - 1):
        out = out * base
    return out


def _embed_left(img, c1, c2, alg):
    one2 = c2.algebra.one()
    terms = {}
    for k1, v1 in img.terms.items():
        for k2, v2 in one2.terms.items():
            terms[c1.algebra.combine_keys(c2.algebra, k1, k2)] = v1 * v2
    return alg.element(terms)


def _embed_right(img, c1, c2, alg):
    one1 = c1.algebra.one()
    terms = {}
    for k1, v1 in one1.terms.items():
        for k2, v2 in img.terms.items():
            terms[c1.algebra.combine_keys(c2.algebra, k1, k2)] = v1 * v2
    return alg.element(terms)


# ---------------------------------------------------------------------------
# the cochain functor and torsion


def cochain_with_coefficients(x: EquivariantCWComplex, h: CoefficientSystem, *,
                              validate_hom: bool = True,
                              tol: float = 1e-10) -> CochainComplex:
    """Hom over ZPi from the cellular chains into H: rank #cells_k modules
    over the target algebra, differential = plain transpose of the boundary
    with the homomorphism applied entrywise."""
    if h.handle != x.group:
        raise HomomorphismInvalid("coefficient system is for a different group")
    if validate_hom:
        h.validate()
    x.validate_boundaries()
    mats = []
    for k, b in enumerate(x.boundaries):
        phi_b = h.image_of_matrix(b)
        mats.append(phi_b.transpose_plain())
    out = CochainComplex.from_matrices(h.algebra, list(x.cells), mats,
                                       label="%s;%s" % (x.label, h.label))
    validate(out, tol)
    return out


def unimodularity_check(h: CoefficientSystem, tol: float = 1e-12) -> tuple:
    """True iff every generator image has Fuglede-Kadison determinant 1."""
    dets = {}
    ok = True
    for name, img in h.generator_images():
        mat = GroupRingMatrix.from_rows(h.algebra, [[img]])
        if img.is_zero():
            ok = False
            dets[name] = -np.inf
            continue
        res = fk_det(mat, strict=False)
        dets[name] = res.log_det
        if abs(res.log_det) > tol or not res.invertible:
            ok = False
    return ok, dets


def l2_torsion(x: EquivariantCWComplex, h: CoefficientSystem, *,
               sigma_log: float = 0.0, tol: float = 1e-8, grid: int = 256,
               require_unimodular: bool = True, **torsion_options):
    """Combinatorial L2-torsion of the space with coefficients in H, as a
    torsion report for the induced cochain complex.  sigma_log rescales the
    preferred generator of det H; it enters through the Euler characteristic."""
    if require_unimodular:
        ok, dets = unimodularity_check(h, max(1e-9, tol))
        if not ok:
            raise NotUnimodular("generator determinants: %r" % dets)
    c = cochain_with_coefficients(x, h)
    report = torsion(c, tol=tol, grid=grid, **torsion_options)
    if sigma_log:
        chi = euler_char(x)
        shift = chi * sigma_log
        report.log_raw += shift
        if report.log_value is not None:
            report.log_value += shift
        report.line_element = report.line_element.scaled(shift)
    return report


# ---------------------------------------------------------------------------
# chain maps, pushouts, products


@dataclass
class ChainMap:
    source: EquivariantCWComplex
    target: EquivariantCWComplex
    matrices: list  # per degree k: IntegralMatrix (#cells_k(target) x #cells_k(source))

    def __post_init__(self):
        degrees = len(self.source.cells)
        while len(self.matrices) < degrees:
            k = len(self.matrices)
            self.matrices.append(IntegralMatrix.zeros(
                self.source.group, self.target.cells[k] if k < len(self.target.cells)
                else 0, self.source.cells[k]))
        for k, m in enumerate(self.matrices):
            tk = self.target.cells[k] if k < len(self.target.cells) else 0
            if m.rows != tk or m.cols != self.source.cells[k]:
                raise ShapeMismatch("chain map degree %d has wrong shape" % k)

    def matrix(self, k: int) -> IntegralMatrix:
        if 0 <= k < len(self.matrices):
            return self.matrices[k]
        return IntegralMatrix.zeros(self.source.group, 0, 0)

    def check_chain_map(self) -> bool:
        """Exact commutation with boundaries when decidable, else deferred."""
        if not self.source.group.decidable():
            return False
        for k in range(len(self.source.cells) - 1):
            db = self.source.boundary(k)
            tb = self.target.boundary(k)
            left = compose_chain(self.matrix(k), db) if db is not None else None
            right = compose_chain(tb, self.matrix(k + 1)) if tb is not None else None
            lhs = left if left is not None else IntegralMatrix.zeros(
                self.source.group, self.matrix(k).rows, self.source.cells[k + 1])
            rhs = right if right is not None else IntegralMatrix.zeros(
                self.source.group, self.matrix(k).rows, self.source.cells[k + 1])
            if not (lhs - rhs).is_zero():
                raise NotCellular("map does not commute with boundaries at degree %d" % k)
        return True

    @staticmethod
    def identity(x: EquivariantCWComplex) -> "ChainMap":
        return ChainMap(x, x, [IntegralMatrix.identity(x.group, c) for c in x.cells])


@dataclass
class PushoutResult:
    space: EquivariantCWComplex
    x0: EquivariantCWComplex
    x1: EquivariantCWComplex
    x2: EquivariantCWComplex
    j1: ChainMap
    j2: ChainMap
    i1: ChainMap
    i2: ChainMap


def _monomial_column_data(m: IntegralMatrix, col: int):
    hits = [(i, v) for (i, j), v in m.entries.items() if j == col]
    if len(hits) != 1:
        return None
    row, v = hits[0]
    if len(v.terms) != 1:
        return None
    (key, coeff), = v.terms.items()
    if coeff not in (1, -1):
        return None
    return row, key, coeff


def pushout_assemble(j1: ChainMap, j2: ChainMap,
                     label: str | None = None) -> PushoutResult:
    """Equivariant pushout along j1 (subcomplex inclusion) and j2 (cellular).

    Cells of the result are the X2 cells followed by the X1 cells away from
    the image of j1; the Mayer-Vietoris chain maps are returned alongside.
    """
    x0, x1, x2 = j1.source, j1.target, j2.target
    if j2.source is not x0 and j2.source.cells != x0.cells:
        raise ShapeMismatch("pushout legs have different sources")
    if x1.group != x2.group or x0.group != x1.group:
        raise ShapeMismatch("pushout requires a common group")
    handle = x0.group
    j1.check_chain_map()
    j2.check_chain_map()
    degrees = max(len(x1.cells), len(x2.cells))

    # j1 must be injective on cells, with unit monomial columns
    image = [dict() for _ in range(degrees)]  # degree -> x1 cell -> (x0 cell, key, sign)
    for k in range(len(x0.cells)):
        m = j1.matrix(k)
        seen = set()
        for col in range(m.cols):
            data = _monomial_column_data(m, col)
            if data is None:
                raise NotSubcomplex("j1 column %d at degree %d is not a unit cell" % (col, k))
            row, key, coeff = data
            if row in seen:
                raise NotSubcomplex("j1 hits cell %d twice at degree %d" % (row, k))
            seen.add(row)
            image[k][row] = (col, key, coeff)

    # new cell indexing: X2 cells first, then X1 cells away from the image
    kept1 = [sorted(set(range(x1.cells[k] if k < len(x1.cells) else 0))
                    - set(image[k])) for k in range(degrees)]
    cells = [(x2.cells[k] if k < len(x2.cells) else 0) + len(kept1[k])
             for k in range(degrees)]
    while len(cells) > 1 and cells[-1] == 0:
        cells.pop()
    n2 = [x2.cells[k] if k < len(x2.cells) else 0 for k in range(len(cells))]

    def i1_entry(k, c1):
        """Image of X1 cell c1 in the new complex, as a column of entries."""
        if k >= len(cells):
            return {}
        if c1 in image[k]:
            c0, key, coeff = image[k][c1]
            # j1(c0) = coeff*key*c1, so c1 = coeff*key^-1 * j2(c0) in the pushout
            inv = handle.inv(key)
            out = {}
            m2 = j2.matrix(k)
            for (r2, c0b), v in m2.entries.items():
                if c0b != c0:
                    continue
                moved = v.translate(inv) * coeff
                out[r2] = out.get(r2, IntegralElement(handle)) + moved
            return out
        return {n2[k] + kept1[k].index(c1): IntegralElement.unit(handle)}

    i1_mats, i2_mats = [], []
    for k in range(len(cells)):
        r1 = x1.cells[k] if k < len(x1.cells) else 0
        entries = {}
        for c1 in range(r1):
            for row, v in i1_entry(k, c1).items():
                entries[(row, c1)] = entries.get((row, c1), IntegralElement(handle)) + v
        i1_mats.append(IntegralMatrix(handle, cells[k], r1, entries))
        r2 = x2.cells[k] if k < len(x2.cells) else 0
        i2_mats.append(IntegralMatrix(handle, cells[k], r2,
                                      {(i, i): IntegralElement.unit(handle)
                                       for i in range(r2)}))

    boundaries = []
    for k in range(len(cells) - 1):
        entries = {}
        b2 = x2.boundary(k)
        if b2 is not None:
            for (i, j), v in b2.entries.items():
                entries[(i, j)] = v
        b1 = x1.boundary(k)
        for new_col, c1 in enumerate(kept1[k + 1]):
            col = n2[k + 1] + new_col
            if b1 is None:
                continue
            for (r, c), v in b1.entries.items():
                if c != c1:
                    continue
                # reroute the X1 boundary rows through i1
                for row, unit in i1_entry(k, r).items():
                    add = v * unit if _is_unit_identity(unit, handle) else \
                        _left_compose(unit, v)
                    key = (row, col)
                    entries[key] = entries.get(key, IntegralElement(handle)) + add
        boundaries.append(IntegralMatrix(handle, cells[k], cells[k + 1], entries))

    space = EquivariantCWComplex(handle, cells, boundaries,
                                 label or "%s|_|%s" % (x1.label, x2.label))
    space.validate_boundaries()
    i1 = ChainMap(x1, space, i1_mats[:len(x1.cells)])
    i2 = ChainMap(x2, space, i2_mats[:len(x2.cells)])
    i1.check_chain_map()
    i2.check_chain_map()
    return PushoutResult(space, x0, x1, x2, j1, j2, i1, i2)


def _is_unit_identity(e: IntegralElement, handle) -> bool:
    return e.terms == {handle.identity(): 1}


def _left_compose(unit: IntegralElement, coeff: IntegralElement) -> IntegralElement:
    """Coefficient of a rerouted boundary: the boundary coefficient acts first,
    the cell identification second."""
    out = IntegralElement(unit.handle)
    for k1, c1 in coeff.terms.items():
        for k2, c2 in unit.terms.items():
            key = unit.handle.mul(k1, k2)
            out = out + IntegralElement(unit.handle, {key: c1 * c2})
    return out


def disjoint_union(x1: EquivariantCWComplex,
                   x2: EquivariantCWComplex) -> EquivariantCWComplex:
    if x1.group != x2.group:
        raise ShapeMismatch("disjoint union requires a common group")
    degrees = max(len(x1.cells), len(x2.cells))
    cells = [(x1.cells[k] if k < len(x1.cells) else 0)
             + (x2.cells[k] if k < len(x2.cells) else 0) for k in range(degrees)]
    bnds = []
    for k in range(degrees - 1):
        n1k = x1.cells[k] if k < len(x1.cells) else 0
        n1k1 = x1.cells[k + 1] if k + 1 < len(x1.cells) else 0
        entries = {}
        b1 = x1.boundary(k)
        if b1 is not None:
            entries.update(b1.entries)
        b2 = x2.boundary(k)
        if b2 is not None:
            for (i, j), v in b2.entries.items():
                entries[(n1k + i, n1k1 + j)] = v
        bnds.append(IntegralMatrix(x1.group, cells[k], cells[k + 1], entries))
    return EquivariantCWComplex(x1.group, cells, bnds,
                                "%s+%s" % (x1.label, x2.label))


def product_space(x1: EquivariantCWComplex, x2: EquivariantCWComplex,
                  label: str | None = None) -> EquivariantCWComplex:
    """Product complex with Koszul signs; trivial factors collapse onto the
    other handle so fiber products stay over the fiber's group."""
    if is_trivial_handle(x2.group):
        handle = x1.group
        def key_pair(k1, k2): return k1
    elif is_trivial_handle(x1.group):
        handle = x2.group
        def key_pair(k1, k2): return k2
    else:
        handle = ProductHandle(x1.group, x2.group)
        def key_pair(k1, k2): return (k1, k2)
    n1, n2 = len(x1.cells), len(x2.cells)
    total = n1 + n2 - 1
    blocks = [[(i, n - i) for i in range(n1) if 0 <= n - i < n2]
              for n in range(total)]

    def block_cells(i, j):
        return x1.cells[i] * x2.cells[j]

    cells = [sum(block_cells(i, j) for i, j in blocks[n]) for n in range(total)]
    offsets = []
    for n in range(total):
        off = {}
        acc = 0
        for i, j in blocks[n]:
            off[(i, j)] = acc
            acc += block_cells(i, j)
        offsets.append(off)

    def lift(elt: IntegralElement, which: int) -> IntegralElement:
        out = {}
        for key, c in elt.terms.items():
            if which == 1:
                out[key_pair(key, x2.group.identity())] = c
            else:
                out[key_pair(x1.group.identity(), key)] = c
        return IntegralElement(handle, out)

    boundaries = []
    for n in range(total - 1):
        entries = {}
        for (i, j) in blocks[n + 1]:
            src_off = offsets[n + 1][(i, j)]
            b1 = x1.boundary(i - 1)
            if i >= 1 and (i - 1, j) in offsets[n] and b1 is not None:
                tgt_off = offsets[n][(i - 1, j)]
                for (r, c), v in b1.entries.items():
                    lifted = lift(v, 1)
                    for t in range(x2.cells[j]):
                        entries[(tgt_off + r * x2.cells[j] + t,
                                 src_off + c * x2.cells[j] + t)] = lifted
            b2 = x2.boundary(j - 1)
            if j >= 1 and (i, j - 1) in offsets[n] and b2 is not None:
                tgt_off = offsets[n][(i, j - 1)]
                sign = (-1) ** i
                for (r, c), v in b2.entries.items():
                    lifted = lift(v, 2) * sign
                    for s in range(x1.cells[i]):
                        entries[(tgt_off + s * x2.cells[j - 1] + r,
                                 src_off + s * x2.cells[j] + c)] = lifted
        boundaries.append(IntegralMatrix(handle, cells[n], cells[n + 1], entries))
    out = EquivariantCWComplex(handle, cells, boundaries,
                               label or "%sx%s" % (x1.label, x2.label))
    out.validate_boundaries()
    return out


def product_coefficients(h1: CoefficientSystem, h2: CoefficientSystem,
                         x1: EquivariantCWComplex, x2: EquivariantCWComplex
                         ) -> CoefficientSystem:
    """Coefficient system on the product space matching product_space's
    handle-collapsing conventions."""
    if is_trivial_handle(x2.group):
        return h1
    if is_trivial_handle(x1.group):
        return h2
    return CoefficientSystem.product(h1, h2)


def mapping_torus(x: EquivariantCWComplex, chain_self_map: list,
                  label: str | None = None) -> EquivariantCWComplex:
    """Algebraic mapping torus of a chain self map f over pi x Z:
    T_k = C_k + C_(k-1), boundary [[d, z f - 1], [0, -d]]."""
    handle = ProductHandle(x.group, FreeAbelianHandle(1))
    n = len(x.cells)

    def xc(k: int) -> int:
        return x.cells[k] if 0 <= k < n else 0

    cells = [xc(k) + xc(k - 1) for k in range(n + 1)]

    def lift(elt: IntegralElement, z_power: int = 0) -> IntegralElement:
        return IntegralElement(handle, {(k, (z_power,)): c
                                        for k, c in elt.terms.items()})

    f = [m if isinstance(m, IntegralMatrix) else
         IntegralMatrix.identity(x.group, x.cells[k])
         for k, m in enumerate(chain_self_map)]
    if len(f) != n:
        raise ShapeMismatch("chain self map needs one matrix per degree")
    boundaries = []
    for k in range(n):
        entries = {}
        b = x.boundary(k)
        if b is not None:
            for (i, j), v in b.entries.items():
                entries[(i, j)] = lift(v)
        # the (z f - 1) block maps the shifted copy of C_k into C_k
        for (i, j), v in f[k].entries.items():
            entries[(i, xc(k + 1) + j)] = lift(v, 1)
        for i in range(xc(k)):
            pos = (i, xc(k + 1) + i)
            entries[pos] = entries.get(pos, IntegralElement(handle)) \
                - IntegralElement.unit(handle)
        if k >= 1:
            b_prev = x.boundary(k - 1)
            if b_prev is not None:
                for (i, j), v in b_prev.entries.items():
                    entries[(xc(k) + i, xc(k + 1) + j)] = -lift(v)
        boundaries.append(IntegralMatrix(handle, cells[k], cells[k + 1], entries))
    out = EquivariantCWComplex(handle, cells, boundaries,
                               label or "T(%s)" % x.label)
    out.validate_boundaries()
    return out


# ---------------------------------------------------------------------------
# lifting and ordering changes


def relift_cell(x: EquivariantCWComplex, degree: int, cell: int,
                g) -> EquivariantCWComplex:
    """Replace the chosen lift of one equivariant cell by its g-translate.

    The cell's boundary column is left-translated by g and its row in the
    next boundary is right-translated by g^-1; boundary exactness and the
    torsion are unchanged.
    """
    if not (0 <= degree < len(x.cells) and 0 <= cell < x.cells[degree]):
        raise BadParams("no cell %d in degree %d" % (cell, degree))
    handle = x.group
    ginv = handle.inv(g)
    boundaries = []
    for k, b in enumerate(x.boundaries):
        entries = dict(b.entries)
        if k == degree - 1:
            for (r, c), v in b.entries.items():
                if c == cell:
                    entries[(r, c)] = v.translate(g)
        if k == degree:
            for (r, c), v in b.entries.items():
                if r == cell:
                    entries[(r, c)] = IntegralElement(
                        handle, {handle.mul(key, ginv): cf
                                 for key, cf in v.terms.items()})
        boundaries.append(IntegralMatrix(handle, b.rows, b.cols, entries))
    out = EquivariantCWComplex(handle, list(x.cells), boundaries, x.label + "~")
    out.validate_boundaries()
    return out


def permute_cells(x: EquivariantCWComplex, degree: int,
                  perm) -> EquivariantCWComplex:
    """Reorder the equivariant cells of one degree."""
    n = x.cells[degree]
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise BadParams("not a permutation of %d cells" % n)
    boundaries = []
    for k, b in enumerate(x.boundaries):
        entries = {}
        for (r, c), v in b.entries.items():
            if k == degree - 1:
                c = perm[c]
            if k == degree:
                r = perm[r]
            entries[(r, c)] = v
        boundaries.append(IntegralMatrix(x.group, b.rows, b.cols, entries))
    out = EquivariantCWComplex(x.group, list(x.cells), boundaries, x.label + "~")
    out.validate_boundaries()
    return out


# ---------------------------------------------------------------------------
# builders


def _word(*letters) -> tuple:
    return tuple(letters)


def builtin_space(name: str, *params) -> EquivariantCWComplex:
    """Standard chain-level spaces; all boundary data is validated exactly
    (or through the designated quotient for presented groups)."""
    name = name.lower()
    triv = trivial_handle()
    if name == "point":
        return EquivariantCWComplex(triv, [1], [], "point")
    if name == "sphere":
        n = _int_param(params, 0, "sphere dimension")
        if n < 1:
            raise BadParams("sphere dimension must be >= 1")
        cells = [1] + [0] * (n - 1) + [1]
        bnds = [IntegralMatrix.zeros(triv, cells[k], cells[k + 1]) for k in range(n)]
        return EquivariantCWComplex(triv, cells, bnds, "S%d" % n)
    if name == "disk":
        n = _int_param(params, 0, "disk dimension")
        if n < 1:
            raise BadParams("disk dimension must be >= 1")
        if n == 1:
            b = IntegralMatrix(triv, 2, 1, {(0, 0): -1, (1, 0): 1})
            return EquivariantCWComplex(triv, [2, 1], [b], "D1")
        sphere = builtin_space("sphere", n - 1)
        cells = list(sphere.cells) + [1]
        bnds = list(sphere.boundaries)
        top = IntegralMatrix(triv, cells[-2], 1, {(0, 0): 1} if n >= 2 else {})
        bnds.append(top)
        return EquivariantCWComplex(triv, cells, bnds, "D%d" % n)
    if name == "circle_z":
        handle = FreeAbelianHandle(1)
        t = IntegralElement(handle, {(1,): 1, (0,): -1})
        b = IntegralMatrix(handle, 1, 1, {(0, 0): t})
        return EquivariantCWComplex(handle, [1, 1], [b], "S1~")
    if name == "torus":
        k = _int_param(params, 0, "torus rank")
        if k < 1:
            raise BadParams("torus rank must be >= 1")
        out = builtin_space("circle_z")
        for _ in range(k - 1):
            out = product_space(out, builtin_space("circle_z"))
        out.label = "T%d" % k
        return out
    if name == "lens":
        p = _int_param(params, 0, "lens order")
        q = _int_param(params, 1, "lens twisting") if len(params) > 1 else 1
        if p < 2 or q % p == 0:
            raise BadParams("lens space needs p >= 2 and q coprime-ish to p")
        handle = FiniteHandle(cyclic_group(p))
        t_minus_1 = IntegralElement(handle, {1: 1, 0: -1})
        norm = IntegralElement(handle, {g: 1 for g in range(p)})
        tq_minus_1 = IntegralElement(handle, {q % p: 1, 0: -1})
        bnds = [IntegralMatrix(handle, 1, 1, {(0, 0): t_minus_1}),
                IntegralMatrix(handle, 1, 1, {(0, 0): norm}),
                IntegralMatrix(handle, 1, 1, {(0, 0): tq_minus_1})]
        return EquivariantCWComplex(handle, [1, 1, 1, 1], bnds, "L(%d,%d)" % (p, q))
    if name == "klein_bottle":
        # <a, b | a b a b^-1>, boundary from Fox derivatives
        handle = PresentedHandle(2, (_word(1, 2, 1, -2),), "klein")
        relator = handle.relators[0]
        d1 = IntegralMatrix(handle, 1, 2, {
            (0, 0): IntegralElement(handle, {(1,): 1, (): -1}),
            (0, 1): IntegralElement(handle, {(2,): 1, (): -1})})
        d2 = IntegralMatrix(handle, 2, 1, {
            (0, 0): fox_derivative(handle, relator, 1),
            (1, 0): fox_derivative(handle, relator, 2)})
        return EquivariantCWComplex(handle, [1, 2, 1], [d1, d2], "K")
    if name == "heisenberg":
        # <x, y | [x,[x,y]], [y,[x,y]]>
        c = _word(1, 2, -1, -2)
        r1 = reduce_word(_word(1) + c + _word(-1) + tuple(-l for l in reversed(c)))
        r2 = reduce_word(_word(2) + c + _word(-2) + tuple(-l for l in reversed(c)))
        handle = PresentedHandle(2, (r1, r2), "heisenberg")
        d1 = IntegralMatrix(handle, 1, 2, {
            (0, 0): IntegralElement(handle, {(1,): 1, (): -1}),
            (0, 1): IntegralElement(handle, {(2,): 1, (): -1})})
        d2 = IntegralMatrix(handle, 2, 2, {
            (i, j): fox_derivative(handle, rel, i + 1)
            for j, rel in enumerate(handle.relators) for i in range(2)})
        return EquivariantCWComplex(handle, [1, 2, 2], [d1, d2], "H3")
    if name == "product":
        if len(params) != 2 or not all(isinstance(p, EquivariantCWComplex)
                                       for p in params):
            raise BadParams("product takes two built spaces")
        return product_space(params[0], params[1])
    if name == "mapping_torus":
        if not params or not isinstance(params[0], EquivariantCWComplex):
            raise BadParams("mapping torus takes a space and a chain self map")
        chain_map = params[1] if len(params) > 1 else [None] * len(params[0].cells)
        return mapping_torus(params[0], chain_map)
    raise UnknownSpace("no builtin space named %r" % name)


def _int_param(params, idx, what) -> int:
    if len(params) <= idx:
        raise BadParams("missing parameter: %s" % what)
    try:
        return int(params[idx])
    except (TypeError, ValueError):
        raise BadParams("bad parameter for %s: %r" % (what, params[idx]))


def default_coefficients(x: EquivariantCWComplex) -> CoefficientSystem:
    """A natural unimodular system for each builtin space."""
    handle = x.group
    if isinstance(handle, (FiniteHandle, FreeAbelianHandle, ProductHandle)):
        if is_trivial_handle(handle):
            return CoefficientSystem.trivial(handle)
        return CoefficientSystem.regular(handle)
    if isinstance(handle, PresentedHandle):
        if handle.name == "klein":
            table = dihedral_group(4)
            alg = GroupAlgebra(table)
            # a -> rotation r, b -> reflection s; s r s^-1 = r^-1 matches
            return CoefficientSystem.presented(
                handle, alg, [alg.group_element(1), alg.group_element(4)], "l2(D4)")
        if handle.name == "heisenberg":
            table = heisenberg_group_mod(3)
            alg = GroupAlgebra(table)
            # x -> (1,0,0), y -> (0,1,0) in the mod-3 model
            return CoefficientSystem.presented(
                handle, alg, [alg.group_element(9), alg.group_element(3)], "l2(H3(3))")
    raise HomomorphismInvalid("no default coefficients for %r" % (handle,))
