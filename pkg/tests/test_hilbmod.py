"""Tests for Hilbertian modules, morphisms and spectral decompositions."""

import numpy as np
import pytest

from l2torsion.algebra import GroupAlgebra, GroupRingMatrix, fk_det, vn_dim
from l2torsion.errors import NotComplex
from l2torsion.groups import cyclic_group, trivial_group
from l2torsion.hilbmod import (ExtendedObject, Morphism, free_module,
                               gram_inverse, harmonic_projection, tp_decompose)


@pytest.fixture
def z3():
    return GroupAlgebra(cyclic_group(3))


def rand_matrix(alg, rng, rows, cols, spread=2):
    entries = {}
    for i in range(rows):
        for j in range(cols):
            terms = {}
            for _ in range(spread):
                g = int(rng.integers(alg.order))
                exps = tuple(int(e) for e in rng.integers(-1, 2, size=alg.torus_rank))
                terms[(g, exps)] = complex(rng.standard_normal(), rng.standard_normal())
            entries[(i, j)] = alg.element(terms)
    return GroupRingMatrix(alg, rows, cols, entries)


# -- adjoints -----------------------------------------------------------------

def test_adjoint_of_translation_is_inverse(z3):
    m = free_module(z3, 1)
    f = Morphism(m, m, GroupRingMatrix.from_rows(z3, [[z3.group_element(1)]]))
    adj = f.adjoint()
    assert adj.matrix.entry(0, 0) == z3.group_element(2)

def test_adjoint_involutive(z3):
    rng = np.random.default_rng(0)
    m2, m3 = free_module(z3, 2), free_module(z3, 3)
    f = Morphism(m2, m3, rand_matrix(z3, rng, 3, 2))
    back = f.adjoint().adjoint()
    assert not (back.matrix - f.matrix).entries

def test_adjoint_inner_product_identity(z3):
    # <f x, y>_t = <x, f* y>_s on random vectors, with a nontrivial gram
    rng = np.random.default_rng(1)
    gram = rand_matrix(z3, rng, 2, 2)
    gram = gram @ gram.star() + GroupRingMatrix.scalar(z3, 2, 0.5)
    from l2torsion.hilbmod import HilbertianModule
    src = free_module(z3, 2)
    tgt = HilbertianModule(z3, 2, gram)
    tgt.validate_gram()
    f = Morphism(src, tgt, rand_matrix(z3, rng, 2, 2))
    fadj = f.adjoint()
    fd = f.matrix.realize_dense()
    ad = fadj.matrix.realize_dense()
    gs = np.eye(6)
    gt = gram.realize_dense()
    x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    lhs = np.vdot(y, gt @ fd @ x)
    rhs = np.vdot(ad @ y, gs @ x)
    assert lhs == pytest.approx(rhs, abs=1e-10)

def test_gram_inverse_round_trip(z3):
    rng = np.random.default_rng(2)
    g = rand_matrix(z3, rng, 2, 2)
    g = g @ g.star() + GroupRingMatrix.scalar(z3, 2, 1.0)
    gi = gram_inverse(g)
    prod = (g @ gi - GroupRingMatrix.identity(z3, 2))
    assert np.abs(prod.realize_dense()).max() < 1e-10


# -- tensor products -----------------------------------------------------------

def test_tensor_identity_is_identity(z3):
    m = free_module(z3, 2)
    t = GroupAlgebra(torus_rank=1)
    mt = free_module(t, 1)
    f = Morphism.identity(m).tensor(Morphism.identity(mt))
    assert f.matrix.shape == (2, 2)
    diff = f.matrix - GroupRingMatrix.identity(f.matrix.algebra, 2)
    assert not diff.entries

def test_tensor_det_multiplies():
    # Det'(2 id on l2(Z/2) (x) 3 id on l2(Z/3)) = 6 via the dense 6x6 realization
    a1, a2 = GroupAlgebra(cyclic_group(2)), GroupAlgebra(cyclic_group(3))
    f1 = Morphism.identity(free_module(a1, 1))
    f2 = Morphism.identity(free_module(a2, 1))
    f = Morphism(f1.source.tensor(f2.source), f1.target.tensor(f2.target),
                 (f1.matrix * 2.0).kron(f2.matrix * 3.0))
    dense = f.matrix.realize_dense()
    assert dense.shape == (6, 6)
    assert fk_det(f.matrix).log_det == pytest.approx(np.log(6.0), abs=1e-12)

def test_tensor_vn_dim_multiplies(z3):
    other = GroupAlgebra(cyclic_group(2))
    m1, m2 = free_module(z3, 2), free_module(other, 3)
    assert m1.tensor(m2).dimension() == m1.dimension() * m2.dimension()

def test_tensor_respects_adjoints(z3):
    rng = np.random.default_rng(3)
    a2 = GroupAlgebra(cyclic_group(2))
    f1 = Morphism(free_module(z3, 2), free_module(z3, 2), rand_matrix(z3, rng, 2, 2))
    f2 = Morphism(free_module(a2, 1), free_module(a2, 1), rand_matrix(a2, rng, 1, 1))
    lhs = f1.tensor(f2).adjoint().matrix
    rhs = f1.adjoint().matrix.kron(f2.adjoint().matrix)
    assert not (lhs - rhs).entries


# -- decomposition and harmonic projections -------------------------------------

def test_tp_decompose_invertible(z3):
    m = free_module(z3, 2)
    f = Morphism(m, m, GroupRingMatrix.scalar(z3, 2, 2.0))
    tor, proj = tp_decompose(ExtendedObject(f))
    assert proj.dimension == pytest.approx(0.0)
    assert tor.vn_rank == pytest.approx(2.0)
    assert tor.log_det == pytest.approx(2 * np.log(2.0), abs=1e-12)

def test_tp_decompose_zero(z3):
    m = free_module(z3, 2)
    tor, proj = tp_decompose(ExtendedObject(Morphism.zero(m, m)))
    assert proj.dimension == pytest.approx(2.0)
    assert tor.vn_rank == pytest.approx(0.0)

def test_tp_decompose_dense_image_torus():
    alg = GroupAlgebra(torus_rank=1)
    m = free_module(alg, 1)
    z = alg.torus_generator()
    f = Morphism(m, m, GroupRingMatrix.from_rows(alg, [[z - alg.one()]]))
    tor, proj = tp_decompose(ExtendedObject(f))
    assert proj.dimension == pytest.approx(0.0, abs=1e-9)
    assert tor.vn_rank == pytest.approx(1.0, abs=1e-9)

def test_harmonic_zero_differentials(z3):
    m = free_module(z3, 3)
    h = harmonic_projection(None, Morphism.zero(m, free_module(z3, 1)))
    assert h.betti == pytest.approx(3.0)
    assert vn_dim(h.projector) == pytest.approx(3.0)

def test_harmonic_circle_over_Z():
    alg = GroupAlgebra(torus_rank=1)
    m = free_module(alg, 1)
    z = alg.torus_generator()
    d = Morphism(m, m, GroupRingMatrix.from_rows(alg, [[z - alg.one()]]))
    h = harmonic_projection(None, d)
    assert h.betti == pytest.approx(0.0, abs=1e-9)

def test_harmonic_sphere_middle_degree():
    # S^2 over the trivial group: C^0 = C, C^1 = 0-rank placeholder via maps
    triv = GroupAlgebra(trivial_group())
    c0 = free_module(triv, 1)
    c1 = free_module(triv, 1)
    c2 = free_module(triv, 1)
    d0 = Morphism(c0, c1, GroupRingMatrix.from_rows(triv, [[1.0]]))
    d1 = Morphism.zero(c1, c2)
    h = harmonic_projection(d0, d1)
    assert h.betti == pytest.approx(0.0)

def test_harmonic_rejects_non_complex(z3):
    m = free_module(z3, 1)
    d = Morphism(m, m, GroupRingMatrix.identity(z3, 1))
    with pytest.raises(NotComplex):
        harmonic_projection(d, d)

def test_rank_partition(z3):
    # dim ker Delta + dim im(d_in) + dim im(d_out*) = rank of the middle module
    rng = np.random.default_rng(4)
    c0 = free_module(z3, 2)
    c1 = free_module(z3, 3)
    c2 = free_module(z3, 2)
    d0 = Morphism(c0, c1, rand_matrix(z3, rng, 3, 2))
    # build d1 with d1 d0 = 0 densely, then pull back (cokernel projector route)
    from l2torsion.algebra import from_dense_equivariant
    dd = d0.matrix.realize_dense()
    proj = np.eye(9) - dd @ np.linalg.pinv(dd)
    raw = rand_matrix(z3, rng, 2, 3).realize_dense() @ proj
    d1 = Morphism(c1, c2, from_dense_equivariant(z3, raw, 2, 3))
    h = harmonic_projection(d0, d1)
    from l2torsion.numerics import dense_rank
    r_in = dense_rank(d0.matrix.realize_dense()) / 3
    r_out = dense_rank(d1.matrix.realize_dense()) / 3
    assert h.betti + r_in + r_out == pytest.approx(3.0, abs=1e-9)
