"""Exact solvers on finite discrete spaces."""

from .basic import f_divergence, gamma_ipm, gibbs_optimal_measure
from .checks import (
    HessianCheck,
    data_processing_check,
    dual_check,
    hessian_check,
    limit_scan,
)
from .dirac import dirac_example
from .dual import f_gamma_divergence
from .primal import infimal_convolution
from .types import DiracExampleSolution, DivergenceSolution

__all__ = [
    "DivergenceSolution",
    "DiracExampleSolution",
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
    "HessianCheck",
]
