"""Ball probabilities of diagonal normal vectors via the holonomic gradient method.

``P(||X|| <= R)`` for ``X ~ N(mu, diag(sigma2))`` is the CDF of the square root
of a weighted sum of independent noncentral chi-square variables. The
integral of exp(quadratic) over a sphere of radius r and its first partials
satisfy a linear ODE system in r, which is integrated from a series start
near the origin.
"""

from .errors import (
    GroupSeparationTooSmall,
    HgmError,
    NoConvergence,
    NonFinite,
    NonPositiveVariance,
    OverflowUnrecoverable,
    SingularRadius,
    SolverError,
    StepBudgetExceeded,
    StepUnderflow,
)
from .integrator import BallProbResult, SolveOptions, TracePoint, solve_ball_probability, solve_f_trace
from .laplace import LaplaceEval, asymptotic_eval, classify
from .model import ModelParams, NaturalParams, to_natural
from .oracle import McOptions, chi_closed_form, exp_product_closed_form, mc_ball_probability, quad_fisher_bingham
from .series import SeriesOptions, series_f_and_gradient

__all__ = [
    "ModelParams",
    "NaturalParams",
    "to_natural",
    "SeriesOptions",
    "series_f_and_gradient",
    "SolveOptions",
    "BallProbResult",
    "TracePoint",
    "solve_ball_probability",
    "solve_f_trace",
    "LaplaceEval",
    "classify",
    "asymptotic_eval",
    "McOptions",
    "mc_ball_probability",
    "quad_fisher_bingham",
    "chi_closed_form",
    "exp_product_closed_form",
    "HgmError",
    "NonPositiveVariance",
    "NonFinite",
    "NoConvergence",
    "SingularRadius",
    "GroupSeparationTooSmall",
    "SolverError",
    "StepUnderflow",
    "StepBudgetExceeded",
    "OverflowUnrecoverable",
]
