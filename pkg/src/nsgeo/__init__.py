"""Non-stationary limit sets of bivariate extremes.

A two-stage penalised spline model on Laplace margins: a radial quantile
surface gives the threshold, a truncated-gamma gauge surface describes the
radii above it. The fitted surfaces yield tail-dependence coefficients,
return-level sets, joint-tail simulation and VaR/CoVaR.
"""

from .copulas import CopulaSpec, gauge_oracle, joint_log_density, sample_path
from .diagnostics import qq_exponential, rl_probability_diagnostic
from .errors import ConfigError, DataError, ModelError
from .gauge import GaugeGamFit, fit_gauge, trunc_gamma_conditional_quantile, trunc_gamma_nll, trunc_gamma_pit
from .geometry import NormKind, boundary_curve, eta_from_boundary, return_level_curve, to_polar, unit_point
from .margins import MarginalPipeline, fit_pipeline
from .model import FitOptions, eta_trajectory, fit_model
from .numerics import RngStream
from .quantile import QuantileGamFit, exceedances, fit_radial_quantile
from .series import BivariateSeries
from .tail import TailModel, estimate_covar, fit_angular_density, simulate_tail

__version__ = "0.1.0"
