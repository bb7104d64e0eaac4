"""Discrete-velocity BGK solver and verification laboratory.

A slab initial-boundary value solver for the relaxation kinetic equation with
diffuse-reflection walls, plus the operator machinery needed to check its
structure numerically: the conserved-chart Taylor expansion of the collision
operator with a direct-definition oracle, exact discrete wall identities, a
backward-cycle Monte Carlo sampler, and conservation-law residual
diagnostics.
"""

__version__ = "0.1.0"

from .boundary import (
    WallQuadrature,
    apply_reflection,
    build_wall,
    coercivity_identity,
    diffuse_reflect,
    diffuse_reflect_perturbation,
    pgamma_perturbation,
)
from .collision import (
    CollisionParams,
    bgk_rhs,
    collision_frequency,
    linearized_L,
    local_maxwellian,
    matched_maxwellian,
    project_P,
    relax_exact,
)
from .cycles import (
    CycleSample,
    SurvivalEstimate,
    SurvivalProfile,
    estimate_survival,
    make_stream,
    sample_cycle,
    sample_wall_velocity,
    survival_profile,
    wall_speed_cdf,
)
from .diagnostics import (
    DecayFit,
    MacroSeries,
    conservation_residuals,
    fit_decay,
    l2_norm,
    lambda_moments,
    theta_moments,
    weighted_linf,
)
from .errors import (
    BGKError,
    ConfigError,
    DegenerateStateError,
    DomainError,
    FitError,
    NumericsError,
    SchemeViolationError,
)
from .geometry import Domain, backward_exit, contains, outward_normal
from .linearization import (
    GammaParts,
    ThetaQuadrature,
    ThetaState,
    chart_jacobian,
    chart_to_primitive,
    conserved_chart,
    gamma_direct,
    gamma_expansion,
    gamma_stability_probe,
    macroscopic_control_probe,
    nu_p,
    q_i_eval,
    q_ij_eval,
)
from .solver import (
    RunRecord,
    SlabBGK,
    SolverConfig,
    initial_perturbation,
    linear_picard_solve,
    positivity_iteration,
    transport_step,
)
from .state import (
    DistributionField,
    MacroFields,
    load_state,
    save_state,
    to_absolute,
    to_perturbation,
    total_perturbation_mass,
)
from .velocity import (
    VelocityGrid,
    WeightParams,
    build_grid,
    integrate,
    moments,
    weight_value,
)
