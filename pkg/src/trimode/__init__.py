"""trimode: non-Hermitian three-mode coupler dynamics.

Spectral classification of exceptional points, exact factorized
propagators, biorthogonal frames and loop holonomy, and fixed-excitation
photonic dynamics for 3x3 complex mode-coupling matrices.
"""
from .errors import (TrimodeError, NonTracelessError, FrameSingularError,
                     IntegrationError, RenormalizationError)
from .algebra import (GeneratorLabel, GellMannCoefficients, generator_matrix,
                      elementary, traceless_part, gauge_phase, decompose,
                      reconstruct, exp_generator)
from .spectral import (Invariants, Regime, SpectralFrame, BranchEvent,
                       BranchPaths, invariants, trace_invariants, discriminant,
                       discriminant_resultant, cubic_roots, classify,
                       classify_matrix, local_frame, project_biorthogonal,
                       track_branches)
from .propagator import (WeiNormanCoords, PropagationResult, HolonomyResult,
                         wei_norman_rhs, integrate_wei_norman, reconstruct_U,
                         integrate_direct, exp_constant, holonomy)
from .fock import (FockBasis, FockVector, WeightPoint, PromotedFrame,
                   FockPropagation, basis, promote, number_operator,
                   propagate_fock, amplitudes, biorthogonal_populations,
                   weight_coordinates, promote_frame, nilpotency_index,
                   largest_jordan_block)
from .families import (CouplerFamily, LoopSpec, MapResult, pt_cyclic, chiral_1,
                       chiral_2, ep3_loop, constant_family, from_callable,
                       from_samples, find_ep2, discriminant_map, EP3_CENTER)

__version__ = "0.1.0"
