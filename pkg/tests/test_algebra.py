"""Tests for group algebras, realizations and the Fuglede-Kadison determinant."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l2torsion.algebra import (GroupAlgebra, GroupRingMatrix, fk_det, involute,
                               trace, vn_dim)
from l2torsion.errors import NotProjection, ShapeMismatch
from l2torsion.groups import cyclic_group, dihedral_group


@pytest.fixture
def z3():
    return GroupAlgebra(cyclic_group(3))


@pytest.fixture
def torus1():
    return GroupAlgebra(torus_rank=1)


def random_element(alg, rng, size=3):
    terms = {}
    for _ in range(size):
        g = int(rng.integers(alg.order))
        exps = tuple(int(e) for e in rng.integers(-2, 3, size=alg.torus_rank))
        terms[(g, exps)] = complex(rng.standard_normal(), rng.standard_normal())
    return alg.element(terms)


# -- trace and involution ----------------------------------------------------

def test_trace_unit(z3):
    assert trace(z3.one()) == 1

def test_trace_off_identity(z3):
    assert trace(z3.group_element(1)) == 0

def test_trace_z3_convolution(z3):
    # (e + t)(e + t) = e + 2t + t^2, trace picks the identity coefficient
    a = z3.one() + z3.group_element(1)
    assert trace(a * a) == pytest.approx(1)

def test_involution_monomial(z3):
    c = 2.0 + 1.0j
    a = z3.group_element(1) * c
    s = involute(a)
    assert s.coefficient((2, ())) == pytest.approx(np.conj(c))

def test_involution_is_involution(z3):
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = random_element(z3, rng)
        assert involute(involute(a)) == a

def test_trace_positive_faithful(z3, torus1):
    rng = np.random.default_rng(1)
    for alg in (z3, torus1):
        for _ in range(20):
            a = random_element(alg, rng)
            val = trace(involute(a) * a)
            expect = sum(abs(c) ** 2 for c in a.terms.values())
            assert val.real == pytest.approx(expect)
            assert abs(val.imag) < 1e-12
            if not a.is_zero():
                assert val.real > 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(-3, 3),
                          st.integers(-3, 3)), min_size=1, max_size=5))
def test_involution_trace_identity_hypothesis(terms):
    # trace(a* a) equals the coefficient l2 norm for integer combinations
    alg = GroupAlgebra(cyclic_group(3), torus_rank=1)
    a = alg.element({(g, (e,)): c for g, e, c in terms})
    val = trace(involute(a) * a)
    assert val.real == pytest.approx(sum(abs(c) ** 2 for c in a.terms.values()))


# -- realization -------------------------------------------------------------

def test_realize_z2_swap():
    alg = GroupAlgebra(cyclic_group(2))
    m = GroupRingMatrix.from_rows(alg, [[alg.one() + alg.group_element(1)]])
    assert np.allclose(m.realize_dense(), np.ones((2, 2)))

def test_realize_is_homomorphism(z3):
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = random_element(z3, rng)
        b = random_element(z3, rng)
        ma = GroupRingMatrix.from_rows(z3, [[a]]).realize_dense()
        mb = GroupRingMatrix.from_rows(z3, [[b]]).realize_dense()
        mab = GroupRingMatrix.from_rows(z3, [[a * b]]).realize_dense()
        assert np.allclose(ma @ mb, mab, atol=1e-12)

def test_torus_symbol_at_zero(torus1):
    m = GroupRingMatrix.from_rows(torus1, [[torus1.torus_generator() - torus1.one()]])
    sym = m.symbol(np.array([[0.0]]))
    assert abs(sym[0, 0, 0]) < 1e-15

def test_mixed_symbol_matches_product(z3):
    # the symbol of a mixed element at theta multiplies like the elements do
    alg = GroupAlgebra(cyclic_group(3), torus_rank=1)
    rng = np.random.default_rng(3)
    a, b = random_element(alg, rng), random_element(alg, rng)
    th = np.array([[0.7], [2.1]])
    ma = GroupRingMatrix.from_rows(alg, [[a]]).symbol(th)
    mb = GroupRingMatrix.from_rows(alg, [[b]]).symbol(th)
    mab = GroupRingMatrix.from_rows(alg, [[a * b]]).symbol(th)
    assert np.allclose(ma @ mb, mab, atol=1e-12)


# -- Fuglede-Kadison determinant ----------------------------------------------

def test_det_identity(z3):
    res = fk_det(GroupRingMatrix.identity(z3, 2))
    assert res.log_det == pytest.approx(0.0, abs=1e-14)
    assert res.invertible and res.det_class

def test_det_cyclic_shift_minus_one():
    # Det'(t - 1 on l2(Z/p)) = p^(1/p)
    for p in (3, 5, 7):
        alg = GroupAlgebra(cyclic_group(p))
        m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
        res = fk_det(m)
        assert res.log_det == pytest.approx(np.log(p) / p, abs=1e-12)
        assert not res.invertible

def test_det_scalar_on_z3(z3):
    m = GroupRingMatrix.scalar(z3, 1, 2.0)
    assert fk_det(m).log_det == pytest.approx(np.log(2.0), abs=1e-12)

def test_det_torus_jensen(torus1):
    # Det'(z - a) = max(1, |a|) by Jensen's formula
    z = torus1.torus_generator()
    for a, expect in ((0.5, 0.0), (2.0, np.log(2.0))):
        m = GroupRingMatrix.from_rows(torus1, [[z - torus1.one() * a]])
        res = fk_det(m)
        assert res.log_det == pytest.approx(expect, abs=1e-9)
        assert res.det_class
        assert res.invertible

def test_det_torus_circle(torus1):
    # z - 1 has a root on the torus: determinant 1, not invertible
    z = torus1.torus_generator()
    res = fk_det(GroupRingMatrix.from_rows(torus1, [[z - torus1.one()]]))
    assert res.log_det == pytest.approx(0.0, abs=1e-10)
    assert not res.invertible

def test_det_multiplicative_finite(z3):
    rng = np.random.default_rng(4)
    done = 0
    while done < 10:
        f = GroupRingMatrix.from_rows(
            z3, [[random_element(z3, rng) for _ in range(2)] for _ in range(2)])
        g = GroupRingMatrix.from_rows(
            z3, [[random_element(z3, rng) for _ in range(2)] for _ in range(2)])
        rf, rg = fk_det(f), fk_det(g)
        if not (rf.invertible and rg.invertible):
            continue
        assert fk_det(f @ g).log_det == pytest.approx(rf.log_det + rg.log_det,
                                                      abs=1e-10)
        done += 1

def test_det_star_invariant(z3):
    rng = np.random.default_rng(5)
    for _ in range(10):
        f = GroupRingMatrix.from_rows(
            z3, [[random_element(z3, rng) for _ in range(2)] for _ in range(2)])
        assert fk_det(f.star()).log_det == pytest.approx(fk_det(f).log_det,
                                                         abs=1e-10)

def test_det_translations_unimodular():
    for alg in (GroupAlgebra(dihedral_group(4)), GroupAlgebra(torus_rank=2)):
        if alg.torus_rank:
            elts = [alg.monomial(exps=(1, 0)), alg.monomial(exps=(-2, 3))]
        else:
            elts = [alg.group_element(g) for g in range(1, alg.order)]
        for e in elts:
            m = GroupRingMatrix.from_rows(alg, [[e]])
            assert abs(fk_det(m).log_det) < 1e-12

def test_det_mixed_model():
    # 2 id on l2(Z/2) (x) 3 id on l2(Z): block constant symbol, Det' = 6
    a1 = GroupAlgebra(cyclic_group(2))
    a2 = GroupAlgebra(torus_rank=1)
    m = GroupRingMatrix.scalar(a1, 1, 2.0).kron(GroupRingMatrix.scalar(a2, 1, 3.0))
    assert m.algebra.kind == "mixed"
    assert fk_det(m).log_det == pytest.approx(np.log(6.0), abs=1e-10)

def test_det_requires_square(z3):
    with pytest.raises(ShapeMismatch):
        fk_det(GroupRingMatrix.zeros(z3, 1, 2))

def test_det_zero_morphism_is_one(z3):
    assert fk_det(GroupRingMatrix.zeros(z3, 2, 2)).log_det == 0.0


# -- von Neumann dimension -----------------------------------------------------

def test_vn_dim_identity(z3):
    assert vn_dim(GroupRingMatrix.identity(z3, 4)) == pytest.approx(4.0)
    assert vn_dim(5) == 5.0

def test_vn_dim_averaging_idempotent():
    alg = GroupAlgebra(cyclic_group(2))
    p = GroupRingMatrix.from_rows(alg, [[(alg.one() + alg.group_element(1)) * 0.5]])
    assert vn_dim(p) == pytest.approx(0.5)

def test_vn_dim_rejects_non_projection(z3):
    with pytest.raises(NotProjection):
        vn_dim(GroupRingMatrix.scalar(z3, 1, 2.0))

def test_unrealize_round_trip(z3):
    rng = np.random.default_rng(6)
    from l2torsion.algebra import from_dense_equivariant
    m = GroupRingMatrix.from_rows(
        z3, [[random_element(z3, rng) for _ in range(2)] for _ in range(3)])
    back = from_dense_equivariant(z3, m.realize_dense(), 3, 2)
    assert np.allclose(back.realize_dense(), m.realize_dense(), atol=1e-12)
