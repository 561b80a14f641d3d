"""Joint filter and geometry design for non-uniform linear differential microphone arrays."""

__version__ = "0.1.0"

from .array import ArrayGeometry, Wave, cumulative_delays, steering_vector
from .beampattern import (
    DesiredPattern,
    DimensionError,
    FilterWeights,
    PolarGrid,
    desired_pattern,
    pattern_on_grid,
    preset_coefficients,
    synthesized_pattern,
)
from .metrics import (
    DegenerateDesignError,
    DesignMetrics,
    desired_directivity_factor,
    directivity_factor,
    distortionless_residual,
    evaluate_design,
    pattern_mse,
)
from .optimizer import (
    ConfigError,
    DesignProblem,
    DesignResult,
    InfeasibleDesignError,
    Tolerances,
    constraint_jacobian,
    constraint_residuals,
    gradient,
    multistart_initializer,
    objective,
    solve,
    solve_shared,
)

__all__ = [name for name in dir() if not name.startswith("_")]
