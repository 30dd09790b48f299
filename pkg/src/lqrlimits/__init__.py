"""Lower bounds on the excess cost of learning LQR controllers offline,
plus the simulation harness that sanity-checks them."""

from .errors import (
    AllTrialsFailedError,
    BallTooLargeError,
    ConfigError,
    DegenerateInputError,
    DivergenceError,
    ExcitationDeficientError,
    InstabilityError,
    LqrLimitsError,
    NumericalFailureError,
    PerturbationTooLargeError,
)
from .lti import (
    LqrSolution,
    SystemInstance,
    lqr_synthesize,
    solve_dare,
    solve_dlyap,
    spectral_radius,
    tail_sum_J,
    tau,
)
from .perturb import (
    PerturbationBasis,
    PerturbationDirection,
    canonical_basis,
    controller_jacobian,
    directional_gain_derivative,
    finite_difference_gain_derivative,
    input_direction,
    polderman_basis,
    self_direction,
)
from .bounds import (
    BoundReport,
    BurnInCondition,
    ExplorationSetup,
    GammaChoice,
    G_numerator,
    alpha_event_constant,
    asymptotic_lower_bound,
    dimensional_bound,
    exploration_gramian,
    exponential_bound,
    exponential_instance,
    finite_sample_bound,
    fisher_direction_bound,
    hinf_input_sum,
    prior_fisher_norm,
    scalar_bound_curve,
    scalar_instance,
    system_theoretic_bound,
)
from .simulate import (
    LearnerResult,
    SimulationStats,
    TrajectoryBatch,
    certainty_equivalent_gain,
    check_budget,
    empirical_fisher_check,
    excess_cost_exact,
    least_squares_sysid,
    monte_carlo_excess_cost,
    rollout_offline,
    run_pipeline_once,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
