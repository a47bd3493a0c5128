"""End-to-end fit: threshold surface, gauge surface and angular density."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ModelError
from .gauge import GaugeGamFit, fit_gauge
from .geometry import (
    QUADRANTS,
    NormKind,
    boundary_curve,
    default_phi_grid,
    eta_from_boundary,
)
from .quantile import QuantileGamFit, exceedances, fit_radial_quantile
from .series import BivariateSeries
from .tail import TailModel, fit_angular_density

__all__ = ["FitOptions", "fit_model", "eta_trajectory", "fitted_boundary"]

logger = logging.getLogger(__name__)


@dataclass
class FitOptions:
    tau: float = 0.8
    kappa_t: int = 10
    kappa_phi: int = 17
    norm: NormKind = NormKind.L2
    lambda_lo: float = 1e-4
    lambda_hi: float = 1e4
    lambda_n: int = 5
    fixed_lambda_quantile: tuple | None = None
    fixed_lambda_gauge: tuple | None = None
    shape: float = 2.0
    h1: float = 0.25
    h2: float | None = None
    n_jobs: int = 1
    cv_rule: str = "one-se"

    def lambda_grid(self):
        from ._gam import default_lambda_grid

        return default_lambda_grid(self.lambda_lo, self.lambda_hi, self.lambda_n)


def fit_model(series: BivariateSeries, options: FitOptions | None = None, T: int | None = None) -> TailModel:
    """Run both stages and the angular density on a Laplace-scale series.

    Errors are re-raised with the failing stage named.
    """
    o = options or FitOptions()
    if series.scale != "laplace":
        raise DataError("fit_model needs a series on Laplace margins")
    T = int(T or series.T)
    norm = NormKind.parse(o.norm)
    data = series.polar(norm)
    grid = o.lambda_grid()
    try:
        qfit = fit_radial_quantile(
            data, o.tau, o.kappa_t, o.kappa_phi, grid, norm, T, o.fixed_lambda_quantile, o.n_jobs, o.cv_rule
        )
    except (DataError, ModelError) as err:
        raise type(err)(f"quantile stage: {err}") from err
    try:
        exc = exceedances(qfit, data)
        gfit = fit_gauge(
            exc, o.kappa_t, o.kappa_phi, grid, T, o.fixed_lambda_gauge, o.shape, o.tau, norm, o.n_jobs, o.cv_rule
        )
    except (DataError, ModelError) as err:
        raise type(err)(f"gauge stage: {err}") from err
    angular = fit_angular_density(exc, o.h1, o.h2, T)
    logger.info(
        "fit: %d exceedances; quantile lambda=(%g, %g); gauge lambda=(%g, %g)",
        len(exc),
        qfit.lambda_t,
        qfit.lambda_phi,
        gfit.lambda_t,
        gfit.lambda_phi,
    )
    return TailModel(qfit, gfit, angular, norm)


def fitted_boundary(gfit: GaugeGamFit, t, phi_grid=None):
    return boundary_curve(gfit.predict, t, phi_grid if phi_grid is not None else default_phi_grid(), gfit.norm)


def eta_trajectory(gfit: GaugeGamFit, times, phi_grid=None) -> np.ndarray:
    """Per-quadrant coefficients of tail dependence at each time; shape ``(len(times), 4)``."""
    out = np.empty((len(times), 4))
    for i, t in enumerate(times):
        curve = fitted_boundary(gfit, t, phi_grid)
        out[i] = [eta_from_boundary(curve, q) for q in QUADRANTS]
    return out
