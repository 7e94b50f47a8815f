"""Two-stage spatial multiplexing toolkit for large antenna arrays."""

from ._version import __version__

from .capacity import (DualMacInstance, det_identity_check,
                       dual_mac_sum_rate, random_instance)
from .covariance import (ArrayGeometry, ChannelBatch, CovarianceSpec,
                         GroupProfile, kronecker_covariance,
                         one_ring_covariance, sample_channels, uca_radius)
from .deteq import (DetEqSolution, SolverConfig, deteq_jgp_rzf,
                    deteq_pgp_rzf, deteq_pgp_rzf_csit, deteq_pgp_zf,
                    deteq_pgp_zf_csit, solve_resolvent)
from .errors import (ConfigError, ConvergenceError, FeasibilityError,
                     SingularityWarning)
from .harness import (BprimeSweep, Scenario, SlopeResult,
                      feasible_width_cap, parse_scenario, run_scenario,
                      scenario_from_dict, serialize_scenario,
                      slope_analysis, sweep_bprime)
from .layout3d import (DEFAULT_PATTERNS, CellLayout, FairnessReport,
                       Pattern, SectorResult, build_layout,
                       evaluate_sector, fairness_allocate,
                       stream_allocation_search, vertical_beamformers)
from .prebeamforming import (PreBeamformer, approximate_bd, bd_leakage,
                             dft_prebeamforming, eigen_beamforming,
                             identity_prebeamforming, tall_unitary_check)
from .precoding import (PrecodingConfig, SinrReport, build_precoders,
                        exact_sinr, transmit_matrix)
from .spectrum import (DftIndexSet, SpectralDensity, asymptotic_rank,
                       dft_index_set, eigenvalue_cdf, ks_distance,
                       spectral_density, spectral_density_for)
from .training import (CsitEstimate, TrainingConfig, csit_covariances,
                       default_training_power, mmse_estimate, net_rate,
                       simulate_training, training_matrix)
from .validate import CheckResult, run_all
