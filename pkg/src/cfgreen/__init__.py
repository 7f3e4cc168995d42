"""Continued-fraction approximants of many-body Green's functions.

Frequency-domain correlators of small lattice models from nested
commutators and state-induced inner products alone: no time evolution.
Scalar (single-operator) and matrix (operator-pool) recursions, an
exact-diagonalization oracle, truncation error bounds, and shot-noise /
stability experiments.
"""

from .operator_algebra import (OperatorSum, PauliTerm, canonicalize, commutator,
                               dagger, max_weight, pauli_mul)
from .lattice_models import (HubbardSpec, OperatorPoolSpec, build_dimer_compact,
                             build_hubbard, build_pool, dimer_ground_energy,
                             dimer_ground_state, jordan_wigner_annihilation,
                             jordan_wigner_number)
from .exact_reference import (DensityState, Spectrum, ground_state_in_sector,
                              lehmann_green, lorentzian_spectral, to_dense,
                              time_quadrature_green)
from .expectation_backends import (BackendConfig, ExactBackend, PerturbedBackend,
                                   SampledBackend, expect, inner, make_backend,
                                   make_perturbed, make_sigma)
from .cf_scalar import (ScalarCFData, eval_scalar_cf, eval_scalar_recurrence,
                        jones_thron_experiment, scalar_recursion, theorem1_bound)
from .cf_matrix import (MatrixCFData, MatrixCFLevel, eval_matrix_cf, hermitize,
                        matrix_recursion, pq_recursion)
from .analysis import (GreensResult, GridSpec, ModelSpec, RunConfig, emit,
                       measurement_cost_estimate, oracle_sweep, parse_csv,
                       run_sweep, shot_noise_study, stability_study)

__version__ = "0.1.0"
