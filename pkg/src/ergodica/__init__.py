"""Cesaro averages, eigenspace projections and peripheral spectra of truncated C*-dynamical systems."""
from .algebra import (FockBasis, UnitizedElement, boolean_basis, boolean_creator, elem_norm, embed,
                      ket_bra, monotone_basis, monotone_creator, trivial_basis, vacuum_block_basis)
from .dynamics import (CesaroAccumulator, ConjugationEndomorphism, ConvergenceDiagnostics,
                       Endomorphism, HorizonError, PreconditionError, E_lambda_coiso,
                       E_lambda_invertible, E_lambda_iso, cesaro, ergodic_projection_E1,
                       identity_endomorphism, necessary_condition_check,
                       projection_properties_check)
from .gns import (DensityState, GnsData, HaarProductState, SpectralMassEstimate, StateFunctional,
                  eigvec_from_algebra_isometry, gns_build, infinity_state, invariance_residual,
                  isometry_defect, lemma_mle_inequality_check, mixture, point_mass_direct,
                  point_mass_wiener, vacuum_state)
from .modes import ModeElement, ModeEndomorphism
from .spectrum import (SpectrumReport, Superoperator, build_superoperator, containment_check,
                       full_peripheral, peripheral_pp_endo, peripheral_pp_isometry)
from .systems import (GOLDEN, SystemBundle, boolean_shift, build_system, classical_rotation,
                      monotone_bound_check, monotone_shift, rotation_block_variant,
                      rotation_tensor_boolean, sqrt_n_bound_check)

__version__ = "0.1.0"
