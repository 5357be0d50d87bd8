"""Combinatorial L2-torsion of finite equivariant CW complexes.

The library computes Fuglede-Kadison determinants and L2-torsion over two
computable models of finite von Neumann algebras (finite group algebras and
Laurent algebras on the k-torus, plus their tensor products), tracks torsion
values inside formal determinant lines, and numerically verifies the sum,
product and fibration formulas against independent brute-force oracles.
"""

from .algebra import (FkDetResult, GroupAlgebra, GroupRingElement,
                      GroupRingMatrix, fk_det, involute, realize, trace, vn_dim)
from .complexes import (CochainComplex, CohomologyData, TorsionReport,
                        cohomology, direct_sum, tensor_complexes, torsion,
                        twisted_sum, validate)
from .detline import (LineElement, LineExpr, TrivializationContext,
                      graded_alternating, pushforward, rescale_inner_product,
                      ses_iso, trivialize)
from .formulas import (BaseCell, FibrationData, VerifyReport,
                       det_tensor_identity_check, split_determinant_check,
                       trivial_bundle, verify_fibration, verify_product,
                       verify_sum)
from .groups import (FiniteGroupTable, cyclic_group, dihedral_group,
                     heisenberg_group_mod, product_group, trivial_group)
from .hilbmod import (ExtendedObject, HilbertianModule, Morphism, adjoint,
                      free_module, harmonic_projection, tensor, tp_decompose)
from .oracle import mahler_refine, torsion_via_dense, torsion_via_laplacian
from .spaces import (ChainMap, CoefficientSystem, EquivariantCWComplex,
                     builtin_space, cochain_with_coefficients,
                     default_coefficients, euler_char, l2_torsion,
                     mapping_torus, permute_cells, product_space,
                     pushout_assemble, relift_cell, unimodularity_check)

__version__ = "0.1.0"
