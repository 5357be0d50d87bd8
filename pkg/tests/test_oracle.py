"""Tests for the independent torsion and Mahler oracles."""

import numpy as np
import pytest

from l2torsion.algebra import GroupAlgebra, GroupRingMatrix
from l2torsion.complexes import CochainComplex, torsion
from l2torsion.errors import BadParams
from l2torsion.groups import cyclic_group, trivial_group
from l2torsion.oracle import mahler_refine, torsion_via_dense, torsion_via_laplacian

# Smyth's closed form for the log Mahler measure of 1 + z + w
LOG_MAHLER_1ZW = 0.3230659472194505


def scalar_two_term(alg, value):
    m = GroupRingMatrix.from_rows(alg, [[alg.one() * value]])
    return CochainComplex.from_matrices(alg, [1, 1], [m])


def test_laplacian_zero_differentials():
    alg = GroupAlgebra(trivial_group())
    c = CochainComplex.from_matrices(alg, [2, 3], [None])
    assert torsion_via_laplacian(c) == pytest.approx(0.0)


def test_laplacian_times_three():
    # 0 -> C --3--> C -> 0: Delta_0 = Delta_1 = 9, so the value is log 3
    alg = GroupAlgebra(trivial_group())
    c = scalar_two_term(alg, 3.0)
    assert torsion_via_laplacian(c) == pytest.approx(np.log(3.0), abs=1e-12)


def test_laplacian_matches_main_path_lens():
    alg = GroupAlgebra(cyclic_group(5))
    m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
    c = CochainComplex.from_matrices(alg, [1, 1], [m])
    assert torsion_via_laplacian(c) == pytest.approx(torsion(c).log_raw, abs=1e-10)


def test_laplacian_torus_circle():
    alg = GroupAlgebra(torus_rank=1)
    z = alg.torus_generator()
    c = CochainComplex.from_matrices(
        alg, [1, 1], [GroupRingMatrix.from_rows(alg, [[z - alg.one()]])])
    assert torsion_via_laplacian(c) == pytest.approx(0.0, abs=1e-8)


def test_dense_point_complex():
    alg = GroupAlgebra(trivial_group())
    c = CochainComplex.from_matrices(alg, [1], [])
    assert torsion_via_dense(c) == pytest.approx(0.0)


def test_dense_two_term_lens_matches():
    for p in (3, 5, 7):
        alg = GroupAlgebra(cyclic_group(p))
        m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
        c = CochainComplex.from_matrices(alg, [1, 1], [m])
        assert torsion_via_dense(c) == pytest.approx(torsion(c).log_raw, abs=1e-10)


def test_dense_sphere_complex_matches():
    alg = GroupAlgebra(trivial_group())
    d1 = GroupRingMatrix.from_rows(alg, [[1.0], [1.0]])
    c = CochainComplex.from_matrices(alg, [1, 1, 2], [None, d1])
    assert torsion_via_dense(c) == pytest.approx(torsion(c).log_raw, abs=1e-12)
    assert torsion_via_dense(c) == pytest.approx(-0.5 * np.log(2.0), abs=1e-12)


def test_dense_rejects_torus():
    alg = GroupAlgebra(torus_rank=1)
    c = CochainComplex.from_matrices(alg, [1], [])
    with pytest.raises(BadParams):
        torsion_via_dense(c)


def test_mahler_jensen_offset_root():
    alg = GroupAlgebra(torus_rank=1)
    z = alg.torus_generator()
    val, bound = mahler_refine(z - alg.one() * 2.0, 1e-9)
    assert abs(val - np.log(2.0)) <= max(bound, 1e-9)


def test_mahler_root_on_circle():
    alg = GroupAlgebra(torus_rank=1)
    z = alg.torus_generator()
    val, bound = mahler_refine(z - alg.one(), 1e-6)
    assert abs(val) <= max(bound, 1e-6)


def test_mahler_two_variables():
    alg = GroupAlgebra(torus_rank=2)
    p = alg.one() + alg.monomial(exps=(1, 0)) + alg.monomial(exps=(0, 1))
    val, bound = mahler_refine(p, 1e-6)
    assert bound <= 1e-6
    assert val == pytest.approx(LOG_MAHLER_1ZW, abs=1e-6)


def test_mahler_bound_honest():
    # halving the target never moves the value by more than the earlier bound
    alg = GroupAlgebra(torus_rank=1)
    z = alg.torus_generator()
    p = z * 2.0 - alg.one() + alg.monomial(exps=(-1,)) * 0.5
    v1, b1 = mahler_refine(p, 1e-6)
    v2, _ = mahler_refine(p, 5e-7)
    assert abs(v2 - v1) <= b1 + 1e-12
