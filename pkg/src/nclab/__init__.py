"""Numerical laboratory for two-species competition with nonlocal dispersal.

Submodules:
    grid            domain discretization, quadrature, scalar fields
    kernels         dispersal kernel families and sampled matrices
    operators       discrete dispersal operators (no-flux / lethal / mixed)
    spectral        principal spectral bounds and stability verdicts
    single_species  monotone steady-state solver and the depressed-logistic sweep
    competition     two-species systems, dynamics, global classification
    oracles         proof-level integral identities as numeric checks
    config, runner  scenario/sweep configuration and persistent runs
    backend         numba/numpy hot kernels (env NCL_BACKEND)
"""

from .grid import Grid, ScalarField, integrate, make_grid
from .kernels import KernelMatrix, KernelSpec, build_kernel_matrix
from .operators import (DispersalOperator, apply, assemble_operator,
                        quadratic_form, quadratic_form_pairwise)
from .spectral import (SpectralResult, StabilityVerdict, classify_stability,
                       spectral_bound, stability_indices)
from .single_species import (ReactionSpec, SteadyStateResult, compute_C1,
                             march_to_steady, solve_steady_monotone,
                             w_eps_fixed_point)
from .competition import (ClassificationReport, CompetitionSystem,
                          SystemState, Tolerances, assemble_system,
                          check_condition_1_5, classify_global_dynamics,
                          find_positive_steady_state, semi_trivial_states)
from .competition import integrate as integrate_system
from .oracles import (OracleReport, key_relation, mixed_quadratic_form,
                      neutral_case_functionals, sign_functional_W,
                      symmetrization_identity)

__version__ = "0.1.0"
