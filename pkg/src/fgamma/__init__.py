"""Structure-aware divergences between discrete probability measures.

The package computes divergences that interpolate between classical
f-divergences and integral probability metrics by restricting the
variational test-function class.  It provides exact interior-point
solvers on finite spaces (with the two-stage transport decomposition
and its optimality certificates), penalized variational estimators from
samples, and a CLI exposing both plus a property-check harness.
"""

from .errors import FGammaError, InputError, SolverFailure
from .estimators import (
    BiasExperiment,
    EstimateResult,
    EstimatorConfig,
    PenaltyCounterexample,
    SampleSet,
    bias_experiment,
    draw_samples,
    estimate,
    load_samples,
    penalized_divergence,
    penalized_objective,
    penalized_objective_grad,
    penalty_counterexample,
)
from .functionals import (
    FeatureLinearFunction,
    FeatureMap,
    FunctionClass,
    GradientFunction,
    PenaltySpec,
    gradient_penalty,
    grid_indicator_features,
    lambda_f,
    median_pairwise_distance,
    objective_H,
    polynomial_features,
    random_fourier_features,
)
from .generators import (
    ConvexGenerator,
    custom_generator,
    from_name,
    legendre,
    make_alpha,
    make_kl,
)
from .measures import (
    DiscreteMeasure,
    MetricSpec,
    StochasticKernel,
    joint_support,
    load_kernel,
    load_measure,
    pushforward,
    save_measure,
)
from .solvers import (
    DiracExampleSolution,
    DivergenceSolution,
    HessianCheck,
    data_processing_check,
    dirac_example,
    dual_check,
    f_divergence,
    f_gamma_divergence,
    gamma_ipm,
    gibbs_optimal_measure,
    hessian_check,
    infimal_convolution,
    limit_scan,
)

__version__ = "0.1.0"

__all__ = [
    "FGammaError",
    "InputError",
    "SolverFailure",
    "ConvexGenerator",
    "make_kl",
    "make_alpha",
    "from_name",
    "custom_generator",
    "legendre",
    "DiscreteMeasure",
    "MetricSpec",
    "StochasticKernel",
    "joint_support",
    "pushforward",
    "load_measure",
    "save_measure",
    "load_kernel",
    "FunctionClass",
    "FeatureMap",
    "FeatureLinearFunction",
    "GradientFunction",
    "PenaltySpec",
    "lambda_f",
    "objective_H",
    "gradient_penalty",
    "random_fourier_features",
    "polynomial_features",
    "grid_indicator_features",
    "median_pairwise_distance",
    "DivergenceSolution",
    "DiracExampleSolution",
    "HessianCheck",
    "f_divergence",
    "gamma_ipm",
    "gibbs_optimal_measure",
    "f_gamma_divergence",
    "infimal_convolution",
    "dirac_example",
    "limit_scan",
    "dual_check",
    "data_processing_check",
    "hessian_check",
    "SampleSet",
    "EstimatorConfig",
    "EstimateResult",
    "BiasExperiment",
    "PenaltyCounterexample",
    "estimate",
    "penalized_objective",
    "penalized_objective_grad",
    "bias_experiment",
    "penalty_counterexample",
    "penalized_divergence",
    "draw_samples",
    "load_samples",
    "__version__",
]
