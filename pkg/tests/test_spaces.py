"""Tests for equivariant CW complexes, coefficient systems and builders."""

import numpy as np
import pytest

from l2torsion.algebra import GroupAlgebra
from l2torsion.complexes import cohomology, tensor_complexes, torsion
from l2torsion.errors import (BadParams, HomomorphismInvalid, NotSubcomplex,
                              UnknownSpace)
from l2torsion.groups import cyclic_group
from l2torsion.spaces import (ChainMap, CoefficientSystem, FiniteHandle,
                              FreeAbelianHandle, IntegralMatrix, builtin_space,
                              cochain_with_coefficients, default_coefficients,
                              disjoint_union, euler_char, l2_torsion,
                              mapping_torus, product_coefficients,
                              product_space, pushout_assemble,
                              unimodularity_check)


# -- builders and euler characteristics -----------------------------------------

def test_point_and_spheres():
    assert euler_char(builtin_space("point")) == 1
    assert euler_char(builtin_space("sphere", 2)) == 2
    assert euler_char(builtin_space("sphere", 3)) == 0
    assert euler_char(builtin_space("disk", 2)) == 1
    assert euler_char(builtin_space("klein_bottle")) == 0

def test_unknown_space():
    with pytest.raises(UnknownSpace):
        builtin_space("projective_plane")
    with pytest.raises(BadParams):
        builtin_space("sphere", 0)

def test_lens_boundaries_exact():
    x = builtin_space("lens", 5, 1)
    assert x.validate_boundaries()
    assert x.cells == [1, 1, 1, 1]

def test_lens_bad_params():
    with pytest.raises(BadParams):
        builtin_space("lens", 5, 5)

def test_klein_boundary_through_quotient():
    # dd = 0 is deferred for presented groups; the D4 quotient certifies it
    x = builtin_space("klein_bottle")
    assert x.validate_boundaries() is False
    h = default_coefficients(x)
    h.validate()
    c = cochain_with_coefficients(x, h)  # raises NotComplex on failure
    assert c.ranks == [1, 2, 1]

def test_heisenberg_boundary_through_quotient():
    x = builtin_space("heisenberg")
    h = default_coefficients(x)
    h.validate()
    c = cochain_with_coefficients(x, h)
    assert c.ranks == [1, 2, 2]


# -- cochain functor --------------------------------------------------------------

def test_circle_cochain_differential():
    x = builtin_space("circle_z")
    h = default_coefficients(x)
    c = cochain_with_coefficients(x, h)
    # the differential is z - 1 acting on l2(Z)
    entry = c.differentials[0].matrix.entry(0, 0)
    assert entry.coefficient((0, (1,))) == 1
    assert entry.coefficient((0, (0,))) == -1

def test_cochain_ranks_match_cells():
    x = builtin_space("lens", 3, 1)
    c = cochain_with_coefficients(x, default_coefficients(x))
    assert c.ranks == x.cells

def test_homomorphism_validation():
    handle = FiniteHandle(cyclic_group(3))
    alg = GroupAlgebra(cyclic_group(3))
    bad = CoefficientSystem.finite(handle, alg,
                                   [alg.one(), alg.group_element(1), alg.one()])
    with pytest.raises(HomomorphismInvalid):
        bad.validate()


# -- unimodularity ------------------------------------------------------------------

def test_unimodularity_regular_systems():
    for name in (("lens", 3, 1), ("circle_z",), ("klein_bottle",)):
        x = builtin_space(*name)
        ok, dets = unimodularity_check(default_coefficients(x))
        assert ok, dets

def test_unimodularity_scaled_action_fails():
    handle = FreeAbelianHandle(1)
    alg = GroupAlgebra(torus_rank=1)
    h = CoefficientSystem.abelian(handle, alg, [alg.torus_generator() * 2.0])
    ok, dets = unimodularity_check(h)
    assert not ok
    assert dets["t0"] == pytest.approx(np.log(2.0), abs=1e-9)


# -- torsion of spaces -----------------------------------------------------------

def test_point_torsion_any_finite_target():
    x = builtin_space("point")
    rep = l2_torsion(x, CoefficientSystem.trivial(x.group))
    assert rep.log_value == pytest.approx(0.0)

def test_circle_torsion_is_one():
    x = builtin_space("circle_z")
    rep = l2_torsion(x, default_coefficients(x))
    assert rep.log_value == pytest.approx(0.0, abs=1e-10)
    assert rep.weakly_acyclic

def test_sphere_torsion_trivial_coefficients():
    x = builtin_space("sphere", 2)
    rep = l2_torsion(x, CoefficientSystem.trivial(x.group))
    assert rep.log_value == pytest.approx(0.0)
    assert rep.betti == pytest.approx([1.0, 0.0, 1.0])

def test_lens_betti_via_space():
    x = builtin_space("lens", 5, 1)
    c = cochain_with_coefficients(x, default_coefficients(x))
    assert cohomology(c).betti == pytest.approx([0.2, 0.0, 0.0, 0.2], abs=1e-10)

def test_torus2_torsion_is_one():
    x = builtin_space("torus", 2)
    rep = l2_torsion(x, default_coefficients(x))
    assert rep.log_value == pytest.approx(0.0, abs=1e-9)
    assert rep.weakly_acyclic

def test_klein_torsion_is_one():
    x = builtin_space("klein_bottle")
    rep = l2_torsion(x, default_coefficients(x))
    assert rep.log_value == pytest.approx(0.0, abs=1e-10)

def test_sigma_rescaling_enters_through_euler():
    x = builtin_space("sphere", 2)  # chi = 2
    h = CoefficientSystem.trivial(x.group)
    rep = l2_torsion(x, h, sigma_log=np.log(3.0))
    assert rep.log_raw == pytest.approx(2 * np.log(3.0), abs=1e-12)


# -- products ----------------------------------------------------------------------

def test_product_point_identity():
    x = builtin_space("circle_z")
    p = builtin_space("point")
    prod = product_space(x, p)
    assert prod.cells == x.cells
    assert euler_char(prod) == 0

def test_product_of_circles_is_torus():
    t = product_space(builtin_space("circle_z"), builtin_space("circle_z"))
    assert t.cells == [1, 2, 1]
    assert t.validate_boundaries()

def test_product_cochain_matches_tensor():
    x1 = builtin_space("lens", 3, 1)
    x2 = builtin_space("circle_z")
    h1, h2 = default_coefficients(x1), default_coefficients(x2)
    prod = product_space(x1, x2)
    hp = product_coefficients(h1, h2, x1, x2)
    via_space = cochain_with_coefficients(prod, hp)
    via_tensor = tensor_complexes(cochain_with_coefficients(x1, h1),
                                  cochain_with_coefficients(x2, h2))
    assert via_space.ranks == via_tensor.ranks
    for d1, d2 in zip(via_space.differentials, via_tensor.differentials):
        assert (d1.matrix - d2.matrix).coeff_sup() < 1e-12

def test_product_euler_multiplies():
    x1 = builtin_space("sphere", 2)
    x2 = builtin_space("lens", 3, 1)
    assert euler_char(product_space(x1, x2)) == euler_char(x1) * euler_char(x2)

def test_mapping_torus_of_identity_circle():
    x = builtin_space("circle_z")
    t = mapping_torus(x, [None, None])
    assert t.cells == [1, 2, 1]
    rep = l2_torsion(t, CoefficientSystem.regular(t.group))
    assert rep.log_value == pytest.approx(0.0, abs=1e-9)


# -- pushouts ------------------------------------------------------------------------

def sphere_from_disks():
    """S^2 = D^2 u_{S^1} D^2 over the trivial group."""
    s1 = builtin_space("sphere", 1)
    d2a = builtin_space("disk", 2)
    d2b = builtin_space("disk", 2)
    handle = s1.group
    incl = [IntegralMatrix.identity(handle, 1), IntegralMatrix.identity(handle, 1)]
    j1 = ChainMap(s1, d2a, [m for m in incl])
    j2 = ChainMap(s1, d2b, [m for m in incl])
    return pushout_assemble(j1, j2)

def test_pushout_sphere_cells():
    push = sphere_from_disks()
    assert push.space.cells == [1, 1, 2]
    assert euler_char(push.space) == 2
    h = CoefficientSystem.trivial(push.space.group)
    rep = l2_torsion(push.space, h)
    assert rep.betti == pytest.approx([1.0, 0.0, 1.0])

def test_pushout_euler_additivity():
    push = sphere_from_disks()
    assert euler_char(push.space) == euler_char(push.x1) + euler_char(push.x2) \
        - euler_char(push.x0)

def test_pushout_identity_leg():
    # X0 = X1 via the identity: the pushout is X2
    x = builtin_space("lens", 3, 1)
    j1 = ChainMap.identity(x)
    j2 = ChainMap.identity(x)
    push = pushout_assemble(j1, j2)
    assert push.space.cells == x.cells
    rep1 = l2_torsion(push.space, default_coefficients(x))
    rep2 = l2_torsion(x, default_coefficients(x))
    assert rep1.log_raw == pytest.approx(rep2.log_raw, abs=1e-10)

def test_pushout_rejects_non_subcomplex():
    s1 = builtin_space("sphere", 1)
    d2 = builtin_space("disk", 2)
    handle = s1.group
    collapse = IntegralMatrix(handle, 1, 1, {(0, 0): 2})  # not a unit cell map
    j1 = ChainMap(s1, d2, [collapse, IntegralMatrix.identity(handle, 1)])
    j2 = ChainMap.identity(s1)
    with pytest.raises(NotSubcomplex):
        pushout_assemble(j1, ChainMap(s1, s1, [IntegralMatrix.identity(handle, 1),
                                               IntegralMatrix.identity(handle, 1)]))
        pushout_assemble(j1, j2)

def test_disjoint_union_counts():
    a = builtin_space("sphere", 2)
    b = builtin_space("point")
    u = disjoint_union(a, b)
    assert u.cells == [2, 0, 1]
