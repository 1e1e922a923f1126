"""Optimal portfolios under power utility of absolute and benchmark-relative wealth."""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    DimensionError,
    DomainError,
    EstimationError,
    FactorizationError,
    ParameterError,
    RelWealthError,
    SchemaError,
    StructuralError,
    ValidationError,
)
from .model import (
    CapmModel,
    CholeskyFactor,
    MarketModel,
    ValidationReport,
    assemble_capm_investable,
    assemble_capm_noninvestable,
    cholesky_factor,
    validate_capm,
    validate_market,
)
from .objective import (
    BenchmarkSet,
    ObjectiveContext,
    Portfolio,
    UtilityParams,
    combined_utility,
    grad_H,
    objective_H,
    objective_terms,
    portfolio_beta,
    power_utility,
)
from .optimizer import (
    ConstraintSpec,
    Solution,
    capm_constrained_investable,
    capm_constrained_noninvestable,
    check_perturbations,
    kkt_oracle,
    merton_optimal,
    merton_optimal_60_40,
)
from .simulator import SimConfig, SimResult, estimate_expected_utility, simulate_terminal, verify_optimality
