"""Tests for cochain complexes, cohomology and torsion."""

import numpy as np
import pytest

from l2torsion.algebra import GroupAlgebra, GroupRingMatrix, fk_det
from l2torsion.complexes import (CochainComplex, cohomology, direct_sum,
                                 null_homotopy_twist, tensor_complexes,
                                 torsion, twisted_sum, validate)
from l2torsion.errors import NotComplex, ShapeMismatch
from l2torsion.groups import cyclic_group, trivial_group


@pytest.fixture
def triv():
    return GroupAlgebra(trivial_group())


@pytest.fixture
def z3():
    return GroupAlgebra(cyclic_group(3))


@pytest.fixture
def torus1():
    return GroupAlgebra(torus_rank=1)


def scalar_complex(alg, ranks, values):
    """Complex whose differentials are scalar multiples of rectangular identities."""
    mats = []
    for i, v in enumerate(values):
        m = GroupRingMatrix.zeros(alg, ranks[i + 1], ranks[i])
        if v is not None:
            for j in range(min(ranks[i], ranks[i + 1])):
                m = m + GroupRingMatrix(alg, ranks[i + 1], ranks[i],
                                        {(j, j): alg.one() * v})
        mats.append(m)
    return CochainComplex.from_matrices(alg, ranks, mats)


def lens_complex(p, q=1):
    """Cochain complex of the lens space L(p, q) with coefficients l2(Z/p)."""
    alg = GroupAlgebra(cyclic_group(p))
    t = alg.group_element(1)
    tq = alg.group_element(q % p)
    norm = alg.zero()
    for j in range(p):
        norm = norm + alg.group_element(j)
    mats = [GroupRingMatrix.from_rows(alg, [[t - alg.one()]]),
            GroupRingMatrix.from_rows(alg, [[norm]]),
            GroupRingMatrix.from_rows(alg, [[tq - alg.one()]])]
    return CochainComplex.from_matrices(alg, [1, 1, 1, 1], mats, label="lens%d" % p)


def circle_complex():
    alg = GroupAlgebra(torus_rank=1)
    z = alg.torus_generator()
    return CochainComplex.from_matrices(
        alg, [1, 1], [GroupRingMatrix.from_rows(alg, [[z - alg.one()]])],
        label="circle")


# -- validation ---------------------------------------------------------------

def test_validate_zero_differentials(z3):
    c = scalar_complex(z3, [2, 3, 2], [None, None])
    assert validate(c)["d_squared_norms"] == [0.0]

def test_validate_lens_group_ring_identity():
    # (1 + t + ... + t^(p-1))(t - 1) = t^p - 1 = 0
    validate(lens_complex(5))

def test_validate_rejects_bad_complex(z3):
    m = GroupRingMatrix.identity(z3, 1)
    c = CochainComplex.from_matrices(z3, [1, 1, 1], [m, m])
    with pytest.raises(NotComplex):
        validate(c)


# -- cohomology ----------------------------------------------------------------

def test_point_complex_betti(triv):
    c = scalar_complex(triv, [1], [])
    data = cohomology(c)
    assert data.betti == [1.0]
    assert not data.weakly_acyclic

def test_circle_weakly_acyclic():
    data = cohomology(circle_complex())
    assert data.betti == pytest.approx([0.0, 0.0], abs=1e-9)
    assert data.weakly_acyclic and data.det_class

def test_lens_betti():
    for p in (3, 5):
        data = cohomology(lens_complex(p))
        assert data.betti == pytest.approx([1 / p, 0.0, 0.0, 1 / p], abs=1e-10)


# -- torsion -------------------------------------------------------------------

def test_torsion_times_three(triv):
    c = scalar_complex(triv, [1, 1], [3.0])
    rep = torsion(c)
    assert rep.log_value == pytest.approx(np.log(3.0), abs=1e-12)
    assert rep.weakly_acyclic and rep.det_class
    assert rep.line.is_trivial()

def test_torsion_circle_is_one():
    rep = torsion(circle_complex())
    assert rep.log_value == pytest.approx(0.0, abs=1e-10)
    assert rep.weakly_acyclic

def test_torsion_zero_differentials(z3):
    c = scalar_complex(z3, [2, 2], [None])
    rep = torsion(c)
    assert rep.log_value == pytest.approx(0.0)
    assert not rep.weakly_acyclic
    assert not rep.line.is_trivial()

def test_torsion_two_term_lens():
    # l2(Z/p) --(t-1)--> l2(Z/p): Det'(t-1) = p^(1/p) enters the report
    p = 5
    alg = GroupAlgebra(cyclic_group(p))
    m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
    c = CochainComplex.from_matrices(alg, [1, 1], [m])
    rep = torsion(c)
    assert rep.log_raw == pytest.approx(np.log(p) / p, abs=1e-12)
    assert rep.betti == pytest.approx([1 / p, 1 / p])

def test_torsion_shift_inverts(z3):
    c = scalar_complex(z3, [1, 1], [2.0])
    base = torsion(c).log_value
    shifted = torsion(c.shift(1)).log_value
    assert shifted == pytest.approx(-base, abs=1e-12)

def test_torsion_direct_sum_multiplies(z3):
    rng = np.random.default_rng(0)
    l = scalar_complex(z3, [1, 1], [2.0])
    n = scalar_complex(z3, [1, 1], [3.0])
    m = direct_sum(l, n)
    assert torsion(m).log_value == pytest.approx(
        torsion(l).log_value + torsion(n).log_value, abs=1e-10)


# -- twisted sums ----------------------------------------------------------------

def test_twisted_sum_triangular_determinant(triv):
    # L: C --2--> C, N: C --3--> C, any scalar twist c: rho = 6
    l = scalar_complex(triv, [1, 1], [2.0])
    n = scalar_complex(triv, [1, 1], [3.0])
    for c in (0.0, 1.0, -2.5, 10.0):
        t = [GroupRingMatrix.from_rows(triv, [[c]])]
        m = twisted_sum(l, n, t)
        rep = torsion(m)
        assert rep.log_value == pytest.approx(np.log(6.0), abs=1e-10)

def test_twisted_sum_validates(z3):
    rng = np.random.default_rng(1)
    l = scalar_complex(z3, [1, 2, 1], [1.0, None])
    n = scalar_complex(z3, [1, 1, 2], [4.0, None])
    ss = [GroupRingMatrix.from_rows(z3, [[z3.group_element(int(rng.integers(3)))]]),
          GroupRingMatrix.zeros(z3, 2, 1),
          GroupRingMatrix.zeros(z3, 1, 2)]
    tw = null_homotopy_twist(l, n, ss)
    m = twisted_sum(l, n, tw)
    assert validate(m)["ranks"] == [2, 3, 3]

def test_twisted_sum_shape_mismatch(z3):
    l = scalar_complex(z3, [1, 1], [2.0])
    n = scalar_complex(z3, [1, 1], [3.0])
    with pytest.raises(ShapeMismatch):
        twisted_sum(l, n, [GroupRingMatrix.zeros(z3, 5, 5)])


# -- tensor products --------------------------------------------------------------

def test_tensor_with_point_is_identity(z3, triv):
    c = scalar_complex(z3, [1, 1], [2.0])
    point = scalar_complex(triv, [1], [])
    t = tensor_complexes(c, point)
    assert [m.rank for m in t.modules] == [1, 1]
    assert torsion(t).log_value == pytest.approx(torsion(c).log_value, abs=1e-12)

def test_tensor_d_squared_zero_random(z3):
    rng = np.random.default_rng(2)
    a2 = GroupAlgebra(cyclic_group(2))
    for _ in range(5):
        l = scalar_complex(z3, [1, 2, 1], [float(rng.integers(1, 4)), None])
        n = scalar_complex(a2, [2, 1], [float(rng.integers(1, 4))])
        t = tensor_complexes(l, n)
        validate(t)  # raises on failure

def test_tensor_euler_multiplies(z3):
    a2 = GroupAlgebra(cyclic_group(2))
    l = scalar_complex(z3, [1, 2], [None])
    n = scalar_complex(a2, [3, 1, 2], [None, None])
    t = tensor_complexes(l, n)
    assert t.euler_characteristic() == \
        l.euler_characteristic() * n.euler_characteristic()

def test_tensor_product_formula_nonacyclic(triv):
    # chi-weighted product identity with a non-acyclic factor
    l = CochainComplex.from_matrices(
        triv, [1, 2], [GroupRingMatrix.from_rows(triv, [[3.0], [0.0]])])
    n = scalar_complex(triv, [1, 1], [2.0])
    t = tensor_complexes(l, n)
    lhs = torsion(t).log_raw
    rhs = n.euler_characteristic() * torsion(l).log_raw \
        + l.euler_characteristic() * torsion(n).log_raw
    assert lhs == pytest.approx(rhs, abs=1e-10)

def test_tensor_mixed_model_lens_circle():
    t = tensor_complexes(lens_complex(3), circle_complex())
    assert t.algebra.kind == "mixed"
    rep = torsion(t)
    assert rep.log_value == pytest.approx(0.0, abs=1e-9)
    assert rep.weakly_acyclic


# -- gram invariance ----------------------------------------------------------------

def test_gram_rescale_with_line_correction(z3):
    # changing admissible inner products and tracking the detline correction
    # leaves the trivialized torsion unchanged
    rng = np.random.default_rng(3)
    mats = [GroupRingMatrix.from_rows(z3, [[z3.group_element(1) + z3.one() * 2.0]])]
    c = CochainComplex.from_matrices(z3, [1, 1], mats)
    base = torsion(c)
    raw = GroupRingMatrix.from_rows(z3, [[z3.element(
        {(int(rng.integers(3)), ()): complex(rng.standard_normal())})]])
    alphas = []
    for _ in range(2):
        r = GroupRingMatrix.from_rows(z3, [[z3.element(
            {(g, ()): complex(rng.standard_normal()) for g in range(3)})]])
        alphas.append(r @ r.star() + GroupRingMatrix.scalar(z3, 1, 1.0))
    rescaled = c.with_grams(alphas)
    new = torsion(rescaled)
    correction = sum((-1) ** i * (-0.5) * fk_det(a).log_det
                     for i, a in enumerate(alphas))
    assert new.log_value == pytest.approx(base.log_value + correction, abs=1e-9)


def test_trivialize_report_through_context(z3):
    from l2torsion.detline import trivialize
    c = scalar_complex(z3, [2, 2], [None])
    rep = torsion(c)
    ctx = rep.trivialization_context()
    assert trivialize(rep.line_element, ctx) == pytest.approx(np.exp(rep.log_raw))


def test_trivialize_withheld_without_certificate(z3):
    from l2torsion.detline import trivialize, TrivializationContext
    from l2torsion.errors import NotDeterminantClass
    c = scalar_complex(z3, [2, 2], [None])
    rep = torsion(c)
    ctx = TrivializationContext({l: 0.0 for l, _ in rep.line.atoms}, set())
    with pytest.raises(NotDeterminantClass):
        trivialize(rep.line_element, ctx)
