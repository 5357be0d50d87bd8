"""The acceptance suite: golden values and randomized property checks.

Each criterion returns a CriterionResult with a worst-case residual, the
tolerance it was held to, and a human-readable detail string.  The CLI
`selftest` subcommand runs all of them; the test suite asserts them one by
one.  Everything is seeded and deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .algebra import GroupAlgebra, GroupRingMatrix, fk_det
from .complexes import induced_harmonic_offsets, null_homotopy_twist, torsion
from .detline import generator, LineExpr, rescale_inner_product
from .errors import EulerNotZero
from .formulas import (BaseCell, FibrationData, det_tensor_identity_check,
                       split_determinant_check, trivial_bundle,
                       verify_fibration, verify_product, verify_sum)
from .groups import cyclic_group, dihedral_group, product_group
from .oracle import mahler_refine, torsion_via_dense, torsion_via_laplacian
from .randomgen import (extend_space, random_invertible_matrix, random_matrix,
                        random_space, random_weakly_acyclic_complex,
                        subcomplex_inclusion, translated_inclusion)
from .spaces import (ChainMap, CoefficientSystem, FiniteHandle,
                     IntegralMatrix, builtin_space, cochain_with_coefficients,
                     default_coefficients, l2_torsion, permute_cells,
                     pushout_assemble, relift_cell, trivial_handle)

LOG_MAHLER_1ZW = 0.3230659472194505


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    residual: float
    tolerance: float
    elapsed: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return "[%s] criterion %d: %-24s residual %.3e (tol %.0e, %.2fs) %s" % (
            status, self.number, self.name, self.residual, self.tolerance,
            self.elapsed, self.detail)


def _result(number, name, t0, worst, tol, detail="", extra_ok=True):
    return CriterionResult(number, name, bool(worst < tol and extra_ok),
                           float(worst), tol, time.perf_counter() - t0, detail)


# -- criterion 1: tensor determinant lemma ------------------------------------

def criterion_tensor_determinant(samples: int = 200, seed: int = 101) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    a2 = GroupAlgebra(cyclic_group(2))
    a3 = GroupAlgebra(cyclic_group(3))
    worst = 0.0
    for _ in range(samples):
        m1 = random_invertible_matrix(a2, rng, int(rng.integers(1, 4)))
        m2 = random_invertible_matrix(a3, rng, int(rng.integers(1, 4)))
        rep = det_tensor_identity_check(m1, m2)
        worst = max(worst, rep.residual)
    return _result(1, "tensor determinant", t0, worst, 1e-10,
                   "%d random pairs over Z/2 and Z/3" % samples)


# -- criterion 2: golden determinants ------------------------------------------

def criterion_golden_determinants() -> CriterionResult:
    t0 = time.perf_counter()
    worst_cyclic = 0.0
    for p in range(2, 51):
        alg = GroupAlgebra(cyclic_group(p))
        m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
        worst_cyclic = max(worst_cyclic, abs(fk_det(m).log_det - np.log(p) / p))
    torus = GroupAlgebra(torus_rank=1)
    z = torus.torus_generator()
    worst_jensen = 0.0
    for a, expect in ((0.5, 0.0), (2.0, np.log(2.0))):
        m = GroupRingMatrix.from_rows(torus, [[z - torus.one() * a]])
        worst_jensen = max(worst_jensen, abs(fk_det(m).log_det - expect))
    alg2 = GroupAlgebra(torus_rank=2)
    poly = alg2.one() + alg2.monomial(exps=(1, 0)) + alg2.monomial(exps=(0, 1))
    val, bound = mahler_refine(poly, 1e-6, max_resolution=4096)
    mahler_err = abs(val - LOG_MAHLER_1ZW)
    ok = worst_cyclic < 1e-10 and worst_jensen < 1e-8 and \
        mahler_err < 1e-6 and bound <= 1e-6
    worst = max(worst_cyclic / 1e-10, worst_jensen / 1e-8, mahler_err / 1e-6)
    return CriterionResult(2, "golden determinants", ok, worst, 1.0,
                           time.perf_counter() - t0,
                           "cyclic %.1e, jensen %.1e, mahler %.1e (+-%.1e); "
                           "residuals relative to their own tolerances"
                           % (worst_cyclic, worst_jensen, mahler_err, bound))


# -- criterion 3: sum formula ----------------------------------------------------

def _sphere_from_disks():
    s1 = builtin_space("sphere", 1)
    d2a, d2b = builtin_space("disk", 2), builtin_space("disk", 2)
    incl = [IntegralMatrix.identity(s1.group, 1), IntegralMatrix.identity(s1.group, 1)]
    return pushout_assemble(ChainMap(s1, d2a, list(incl)),
                            ChainMap(s1, d2b, list(incl)))


def criterion_sum_formula(samples: int = 100, seed: int = 103) -> CriterionResult:
    t0 = time.perf_counter()
    push = _sphere_from_disks()
    rep = verify_sum(push, CoefficientSystem.trivial(push.space.group))
    worst = rep.residual
    worst_nat = 0.0
    acyclic_cases = 0
    rng = np.random.default_rng(seed)
    primes = [2, 3, 5, 7]
    for i in range(samples):
        p = primes[i % len(primes)]
        handle = FiniteHandle(cyclic_group(p))
        h = CoefficientSystem.regular(handle)
        x0 = random_space(handle, rng, degrees=3,
                          pairs=int(rng.integers(1, 3)),
                          free_cells=int(rng.integers(0, 2)),
                          seed_vertex=bool(rng.integers(0, 2)))
        x1 = extend_space(x0, rng, pairs=int(rng.integers(1, 3)), free_cells=0)
        x2 = extend_space(x0, rng, pairs=1, free_cells=int(rng.integers(0, 2)))
        push = pushout_assemble(subcomplex_inclusion(x0, x1),
                                translated_inclusion(x0, x2, rng))
        rep = verify_sum(push, h, oracle=(i % 5 == 0))
        if "oracle_disagreement" in rep.details:
            worst = max(worst, rep.details["oracle_disagreement"])
        if rep.residual is None:
            return _result(3, "sum formula", t0, np.inf, 1e-8,
                           "partial report on sample %d" % i)
        worst = max(worst, rep.residual)
        if rep.details["weakly_acyclic"]:
            acyclic_cases += 1
            worst_nat = max(worst_nat, rep.details["naturality_gap"],
                            rep.details["real_path_residual"])
    return _result(3, "sum formula", t0, worst, 1e-8,
                   "S2 gluing + %d random pushouts; naturality gap %.2e on %d "
                   "weakly acyclic cases" % (samples, worst_nat, acyclic_cases),
                   extra_ok=(worst_nat < 1e-8))


# -- criterion 4: product formula --------------------------------------------------

def criterion_product_formula() -> CriterionResult:
    t0 = time.perf_counter()
    lens = builtin_space("lens", 3, 1)
    point = builtin_space("point")
    circle = builtin_space("circle_z")
    sphere = builtin_space("sphere", 2)
    r_point = verify_product(lens, default_coefficients(lens),
                             point, CoefficientSystem.trivial(point.group))
    r_cs = verify_product(circle, default_coefficients(circle),
                          sphere, CoefficientSystem.trivial(sphere.group))
    r_lc = verify_product(lens, default_coefficients(lens),
                          circle, default_coefficients(circle))
    worst = max(r_cs.residual, r_lc.residual)
    return _result(4, "product formula", t0, worst, 1e-8,
                   "point identity %.1e, circle x sphere %.1e, "
                   "lens(3,1) x circle %.1e" % (r_point.residual,
                                                r_cs.residual, r_lc.residual),
                   extra_ok=(r_point.residual < 1e-12))


# -- criterion 5: fibration formula --------------------------------------------------

def _klein_bundle_and_coefficients():
    from .spaces import EquivariantCWComplex, IntegralElement, PresentedHandle
    handle = PresentedHandle(2, ((1, 2, 1, -2),), "klein")
    fiber = EquivariantCWComplex(
        handle, [1, 1],
        [IntegralMatrix(handle, 1, 1,
                        {(0, 0): IntegralElement(handle, {(1,): 1, (): -1})})],
        "Kfiber")
    t0 = IntegralMatrix(handle, 1, 2, {
        (0, 0): IntegralElement(handle, {(): 1}),
        (0, 1): IntegralElement(handle, {(2,): 1})})
    t1 = IntegralMatrix(handle, 1, 2, {
        (0, 0): IntegralElement(handle, {(): 1}),
        (0, 1): IntegralElement(handle, {(2, -1): -1})})
    bundle = FibrationData(fiber, [BaseCell(0), BaseCell(1, transport=[t0, t1])],
                           "Klein")
    alg = GroupAlgebra(dihedral_group(4))
    h = CoefficientSystem.presented(handle, alg,
                                    [alg.group_element(1), alg.group_element(4)],
                                    "l2(D4)")
    return bundle, h


def criterion_fibration_formula() -> CriterionResult:
    t0 = time.perf_counter()
    fiber = builtin_space("circle_z")
    attach2 = [IntegralMatrix(trivial_handle(), 1, 1, {(0, 0): 1}),
               IntegralMatrix(trivial_handle(), 0, 1)]
    base_s2 = [BaseCell(0), BaseCell(2, attach=attach2)]
    bundle = trivial_bundle(base_s2, fiber)
    fib = verify_fibration(bundle, default_coefficients(fiber))
    prod = verify_product(fiber, default_coefficients(fiber),
                          builtin_space("sphere", 2),
                          CoefficientSystem.trivial(trivial_handle()))
    driver_gap = abs(fib.residual - prod.residual)
    klein_bundle, klein_h = _klein_bundle_and_coefficients()
    klein = verify_fibration(klein_bundle, klein_h)
    klein_value = abs(klein.details["log_torsion_total"])
    euler_guard = False
    try:
        verify_fibration(trivial_bundle(base_s2, builtin_space("sphere", 2)),
                         CoefficientSystem.trivial(trivial_handle()))
    except EulerNotZero:
        euler_guard = True
    worst = max(fib.residual, klein.residual, klein_value)
    return _result(5, "fibration formula", t0, worst, 1e-8,
                   "trivial-vs-product gap %.1e, klein value %.1e, "
                   "euler guard %s" % (driver_gap, klein_value, euler_guard),
                   extra_ok=(driver_gap < 1e-12 and euler_guard
                             and klein.passed and fib.passed))


# -- criterion 6: oracle equivalence ---------------------------------------------------

def criterion_oracle_equivalence(samples: int = 100, seed: int = 106) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    tables = [cyclic_group(2), cyclic_group(3), cyclic_group(4), cyclic_group(5),
              cyclic_group(6), cyclic_group(7), cyclic_group(8),
              dihedral_group(3), dihedral_group(4),
              product_group(cyclic_group(2), cyclic_group(2))]
    worst = 0.0
    count = 0
    while count < samples:
        table = tables[int(rng.integers(len(tables)))]
        alg = GroupAlgebra(table)
        c = (random_weakly_acyclic_complex(alg, rng, degrees=3,
                                           pairs=int(rng.integers(1, 3)))
             if rng.random() < 0.5 else
             _bounded_det_class_complex(alg, rng))
        if sum(c.ranks) > 12:
            continue
        count += 1
        main = torsion(c).log_raw
        lap = torsion_via_laplacian(c)
        dense = torsion_via_dense(c)
        worst = max(worst, abs(main - lap), abs(main - dense), abs(lap - dense))
    return _result(6, "oracle equivalence", t0, worst, 1e-8,
                   "%d random complexes over groups of order <= 8" % samples)


def _bounded_det_class_complex(alg, rng):
    from .randomgen import random_det_class_complex
    return random_det_class_complex(alg, rng, degrees=3,
                                    pairs=int(rng.integers(1, 3)),
                                    free_cells=int(rng.integers(0, 2)))


# -- criterion 7: well-definedness -----------------------------------------------------

def criterion_well_definedness(samples: int = 50, seed: int = 107) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    primes = [2, 3, 5]
    worst = 0.0
    for i in range(samples):
        p = primes[i % len(primes)]
        handle = FiniteHandle(cyclic_group(p))
        h = CoefficientSystem.regular(handle)
        x = random_space(handle, rng, degrees=3, pairs=2,
                         free_cells=int(rng.integers(0, 2)))
        base = l2_torsion(x, h).log_raw
        # re-lifting: translate a random cell's lift by a group element
        degree = int(rng.integers(0, len(x.cells)))
        if x.cells[degree]:
            cell = int(rng.integers(x.cells[degree]))
            g = int(rng.integers(p))
            relifted = relift_cell(x, degree, cell, g)
            worst = max(worst, abs(l2_torsion(relifted, h).log_raw - base))
        # reordering: permute the cells of a random degree
        degree = int(rng.integers(0, len(x.cells)))
        if x.cells[degree] > 1:
            perm = rng.permutation(x.cells[degree])
            shuffled = permute_cells(x, degree, [int(v) for v in perm])
            worst = max(worst, abs(l2_torsion(shuffled, h).log_raw - base))
        # admissible gram change, corrected through the determinant line and
        # the correspondingly updated harmonic trivialization context
        c = cochain_with_coefficients(x, h)
        alg = c.algebra
        grams = []
        correction = 0.0
        for k in range(c.length):
            raw = random_matrix(alg, rng, c.rank(k), c.rank(k), integer=False)
            gram = raw @ raw.star() + GroupRingMatrix.scalar(alg, c.rank(k), 1.0)
            grams.append(gram)
            e = rescale_inner_product(generator(LineExpr.atom("sigma")), gram)
            correction += (-1) ** k * e.log_scalar
        offsets = induced_harmonic_offsets(c, grams)
        correction += sum((-1) ** k * off for k, off in enumerate(offsets))
        rescaled = torsion(c.with_grams(grams)).log_raw
        worst = max(worst, abs(rescaled - (torsion(c).log_raw + correction)))
    return _result(7, "well-definedness", t0, worst, 1e-9,
                   "%d relift/reorder/rescale transformations" % samples)


# -- criterion 8: split lemma -----------------------------------------------------------

def criterion_split_lemma(samples: int = 100, seed: int = 108) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    primes = [2, 3, 5]
    worst = 0.0
    for i in range(samples):
        p = primes[i % len(primes)]
        alg = GroupAlgebra(cyclic_group(p))
        l = random_weakly_acyclic_complex(alg, rng, degrees=3,
                                          pairs=int(rng.integers(1, 3)))
        n = random_weakly_acyclic_complex(alg, rng, degrees=3,
                                          pairs=int(rng.integers(1, 3)))
        ss = [random_matrix(alg, rng, l.rank(k), n.rank(k))
              for k in range(max(l.length, n.length))]
        rep = split_determinant_check(l, n, null_homotopy_twist(l, n, ss))
        worst = max(worst, rep.details["det_residual"],
                    rep.details["rho_residual"])
    return _result(8, "split lemma", t0, worst, 1e-10,
                   "%d random twisted sums of weakly acyclic complexes" % samples)


ALL_CRITERIA = [
    criterion_tensor_determinant,
    criterion_golden_determinants,
    criterion_sum_formula,
    criterion_product_formula,
    criterion_fibration_formula,
    criterion_oracle_equivalence,
    criterion_well_definedness,
    criterion_split_lemma,
]


def run_all(fast: bool = False) -> list:
    """Run every acceptance criterion; fast mode shrinks the sample counts."""
    results = []
    for fn in ALL_CRITERIA:
        if fast and fn in (criterion_sum_formula, criterion_oracle_equivalence,
                           criterion_split_lemma):
            results.append(fn(samples=20))
        elif fast and fn is criterion_tensor_determinant:
            results.append(fn(samples=40))
        elif fast and fn is criterion_well_definedness:
            results.append(fn(samples=10))
        else:
            results.append(fn())
    return results
