"""Operator calculus of symmetric measures on finite networks and dyadic kernel discretizations."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .measure import (FiniteSymmetricMeasure, analyze_irreducibility, attainable, build_measure,
                      dumps_measure, from_dense, indicator, loads_measure, measure_from_dict,
                      measure_to_dict, rectangle_mass, rho_n_mass, rho_n_matrix, symmetrize)
from .operators import (MarkovSystem, apply_Delta, apply_P, apply_P_power, apply_R, coembed_Jstar,
                        embed_J, laplacian_spectrum, markov_system, mu_P_density,
                        reversibility_battery, spectrum_P)
from .energy import (EnergyForm, corollary_checks, diagram_residual, drop, energy_inner,
                     energy_norm, harmonic_solve, indicator_energy, royden_project)
from .equiv import (EquivalenceData, general_equivalence_rn, laplacian_prime_identity,
                    markov_prime_via_formula, q_isometry_check, transform_measure)
from .pathspace import (PathEnsemble, check_distribution_reversal, estimate_lambda_event,
                        martingale_diagnostic, sample_paths)
from .green import (KilledSystem, green_decompose, green_energy_identities, green_series,
                    green_solve, kill, symmetric_pair_check)
from .kernel import KernelSpec, check_symmetry, fiber_mass, kernel_rectangle_mass, parse_kernel
from .discretize import (check_connected, conductance_sequence, discretize_kernel,
                         discretize_ladder, vertex_mass_sequence)
