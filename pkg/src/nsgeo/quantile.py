"""Stage one: the non-stationary radial quantile surface ``r_tau(phi, t)``.

Fitted on the log scale by penalised smoothed-pinball regression, with the
two smoothing weights chosen by blocked cross-validation of the plain
pinball loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _gam
from .errors import DataError, ModelError
from .geometry import NormKind, PolarPoint

__all__ = [
    "QuantileGamFit",
    "fit_radial_quantile",
    "predict_quantile",
    "exceedances",
    "Exceedances",
    "smoothed_pinball",
    "pinball",
]

logger = logging.getLogger(__name__)


@dataclass
class QuantileGamFit(_gam.TensorSurface):
    tau: float = 0.8
    smoothing_scale: float = 0.0
    cv_scores: np.ndarray | None = None


def pinball(z, tau):
    z = np.asarray(z, float)
    return np.where(z >= 0, tau * z, (tau - 1.0) * z)


def smoothed_pinball(z, tau, s):
    """``(tau - 1) z + s log(1 + exp(z/s))`` with first and second derivatives in z."""
    z = np.asarray(z, float)
    u = z / s
    value = (tau - 1.0) * z + s * np.logaddexp(0.0, u)
    sig = expit(u)
    return value, (tau - 1.0) + sig, sig * (1.0 - sig) / s


def _pinball_loss(y, tau, s):
    def loss(eta):
        v, d1, d2 = smoothed_pinball(y - eta, tau, s)
        return v.sum(), -d1, d2

    return loss


def _fit_one(problem, y, tau, s, lam_t, lam_p, theta0):
    if theta0 is None:
        theta0 = np.zeros(problem.dim)
        theta0[0] = np.quantile(y, tau)
        # continuation from a heavily smoothed loss towards the target one
        for mult in (16.0, 4.0):
            res = _gam.fit_penalized(problem, _pinball_loss(y, tau, s * mult), lam_t, lam_p, theta0)
            theta0 = res.x
    return _gam.fit_penalized(problem, _pinball_loss(y, tau, s), lam_t, lam_p, theta0)


def fit_radial_quantile(
    data: PolarPoint,
    tau: float = 0.8,
    kappa_t: int = 10,
    kappa_phi: int = 17,
    lambda_grid=None,
    norm=NormKind.L2,
    T: int | None = None,
    fixed_lambda: tuple[float, float] | None = None,
    n_jobs: int = 1,
    cv_rule: str = "one-se",
) -> QuantileGamFit:
    """Fit ``log r_tau(phi, t) = beta0 + s(t, phi)``.

    Parameters
    ----------
    data : PolarPoint
        Radii, angles and time indices (1-based) of the observations.
    tau : float
        Quantile level of the radial threshold.
    kappa_t, kappa_phi : int
        Number of time and angle knots.
    lambda_grid : sequence of (lambda_t, lambda_phi), optional
        Candidate smoothing weights; defaults to a 5 x 5 log grid on [1e-4, 1e4].
    T : int, optional
        Length of the observation window; defaults to ``max(data.t)``.
    fixed_lambda : (float, float), optional
        Skip cross-validation and use these weights.
    cv_rule : {"one-se", "min"}
        How the cross-validated losses pick the weights.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    r = np.asarray(data.r, float)
    if r.size < 10 or np.any(r <= 0) or np.ptp(r) == 0:
        raise DataError("radial quantile fit needs at least 10 positive, non-identical radii")
    y = np.log(r)
    t = np.asarray(data.t, float)
    T = int(T or np.max(t))
    problem, kt, kp = _gam.build_problem(t, data.phi, T, kappa_t, kappa_phi)
    mad = np.median(np.abs(y - np.median(y)))
    s = 0.05 * (mad if mad > 0 else np.std(y))

    scores = None
    if fixed_lambda is None:
        grid = lambda_grid or _gam.default_lambda_grid()

        def score(rows, eta):
            return pinball(y[rows] - eta, tau)

        def fit_fn(rows, sub, lam_t, lam_p, theta0):
            return _fit_one(sub, y[rows], tau, s, lam_t, lam_p, theta0)

        lam, scores = _gam.cross_validate(problem, fit_fn, score, t, grid, n_jobs=n_jobs, rule=cv_rule)
    else:
        lam = tuple(float(v) for v in fixed_lambda)
    res = _fit_one(problem, y, tau, s, lam[0], lam[1], None)
    if not res.success:
        logger.warning("quantile fit stopped early: %s (|grad|=%.3g)", res.message, res.grad_norm)
    beta0, coefs = problem.full_coefs(res.x)
    logger.info("quantile stage: lambda_t=%g lambda_phi=%g", lam[0], lam[1])
    return QuantileGamFit(
        beta0, coefs, kt, kp, lam[0], lam[1], NormKind.parse(norm), tau=tau, smoothing_scale=s, cv_scores=scores
    )


def predict_quantile(fit: QuantileGamFit, phi, t):
    return fit.predict(phi, t)


@dataclass
class Exceedances:
    """Observations above the fitted radial quantile, with their thresholds."""

    points: PolarPoint
    thresholds: np.ndarray
    index: np.ndarray

    def __len__(self):
        return self.thresholds.size


def exceedances(fit: QuantileGamFit, data: PolarPoint) -> Exceedances:
    thr = fit.predict(data.phi, data.t)
    mask = np.asarray(data.r) > thr
    if not np.any(mask):
        raise ModelError("no observation exceeds the fitted radial quantile")
    return Exceedances(data.subset(mask), thr[mask], np.flatnonzero(mask))
