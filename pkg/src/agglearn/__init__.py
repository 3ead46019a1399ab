"""Learning from aggregate responses.

Bagging operators, bag/instance/interpolating losses, the closed-form
interpolating estimator for linear regression, proportional-regime risk
theory, a label-DP aggregation mechanism and Monte Carlo experiments.
"""

from .bagging import (
    AggregateDataset,
    BagAssignment,
    aggregate_responses,
    apply_E,
    apply_Lambda,
    apply_StS,
    assign_bags,
    bag_means,
)
from .errors import (
    AggLearnError,
    ConfigMismatch,
    DegenerateDenominator,
    DivergentVariance,
    DivisibilityError,
    DomainError,
    LengthMismatch,
    MissingBound,
    SingularSystem,
)
from .estimator import (
    ConditionalRisk,
    LinearFit,
    conditional_bias_variance,
    fit_bag_level,
    fit_instance_level,
    fit_interpolating,
)
from .losses import (
    ScalarLoss,
    bag_loss,
    check_loss_bounds,
    instance_loss,
    interpolating_loss,
    regularizer,
    squared_loss,
)
from .privacy import DpConfig, SensitivityConvention, dp_risk_theory, optimal_bag_size, privatize, sensitivity
from .simulation import ExperimentConfig, generate_synthetic, run_dp_experiment, run_theory_verification
from .theory import (
    EQUAL,
    TheoryPoint,
    optimal_rho,
    risk_curve,
    snr_threshold,
    solve_bias,
    solve_variance,
    theory_point,
)

__version__ = "0.1.0"
