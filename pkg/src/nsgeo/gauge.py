"""Stage two: the non-stationary gauge ``m(phi, t)``.

Radii above the stage-one threshold are modelled as gamma with fixed shape
(2 in the bivariate case) and rate ``m(phi, t)``, truncated below at the
threshold. ``log m`` is a tensor smooth fitted by penalised maximum
likelihood with the same design and smoothing selection as stage one.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _gam, numerics
from .errors import DataError, ModelError
from .geometry import NormKind
from .quantile import Exceedances

__all__ = [
    "GaugeGamFit",
    "trunc_gamma_nll",
    "trunc_gamma_terms",
    "stationary_rate_mle",
    "fit_gauge",
    "predict_gauge",
    "trunc_gamma_conditional_quantile",
    "trunc_gamma_pit",
]

logger = logging.getLogger(__name__)

DEFAULT_SHAPE = 2.0


@dataclass
class GaugeGamFit(_gam.TensorSurface):
    shape: float = DEFAULT_SHAPE
    tau: float = 0.8
    cv_scores: np.ndarray | None = None


def _log_psi(x, shape):
    # log of x * density(x) / survival(x) for a unit-rate gamma
    with np.errstate(divide="ignore"):
        return shape * np.log(x) - x - gammaln(shape) - numerics.log_gamma_sf(x, shape, 1.0)


def trunc_gamma_terms(eta, r, r_thresh, shape: float = DEFAULT_SHAPE):
    """Per-observation negative log-likelihood and its first two derivatives in ``eta = log m``.

    Returns ``(nll, d1, d2)`` arrays. The truncation term is handled on the
    log scale, so thresholds deep in the tail do not underflow.
    """
    eta = np.asarray(eta, float)
    r = np.asarray(r, float)
    r_thresh = np.asarray(r_thresh, float)
    m = np.exp(eta)
    x = m * r_thresh
    logq = numerics.log_gamma_sf(x, shape, 1.0)
    nll = -(shape * eta + (shape - 1.0) * np.log(r) - m * r - gammaln(shape) - logq)
    psi = np.where(x > 0, np.exp(_log_psi(np.where(x > 0, x, 1.0), shape)), 0.0)
    mr = m * r
    d1 = -shape + mr - psi
    d2 = mr - psi * (shape - x + psi)
    return nll, d1, d2


def trunc_gamma_nll(params, design: np.ndarray, r, r_thresh, shape: float = DEFAULT_SHAPE):
    """Negative log-likelihood of truncated-gamma radii and its gradient.

    Parameters
    ----------
    params : array
        Coefficients; ``log m = design @ params``.
    design : (n, p) array
        Linear predictor matrix, including an intercept column if wanted.
    r, r_thresh : arrays
        Radii and their thresholds; every radius must exceed its threshold.

    Returns
    -------
    value : float
    gradient : (p,) array
    """
    r = np.asarray(r, float)
    r_thresh = np.asarray(r_thresh, float)
    if np.any(r_thresh < 0) or np.any(r <= r_thresh):
        raise DataError("radii must exceed their non-negative thresholds")
    eta = design @ np.asarray(params, float)
    nll, d1, _ = trunc_gamma_terms(eta, r, r_thresh, shape)
    bad = ~np.isfinite(nll)
    if np.any(bad):
        raise FloatingPointError(f"non-finite likelihood term at observation {int(np.flatnonzero(bad)[0])}")
    return float(nll.sum()), design.T @ d1


def _loss(r, r_thresh, shape):
    def loss(eta):
        nll, d1, d2 = trunc_gamma_terms(eta, r, r_thresh, shape)
        return nll.sum(), d1, d2

    return loss


def stationary_rate_mle(r, r_thresh, shape: float = DEFAULT_SHAPE) -> float:
    """Maximum-likelihood constant rate for truncated-gamma radii."""
    r = np.asarray(r, float)
    r_thresh = np.asarray(r_thresh, float)
    # untruncated MLE as the starting point
    init = np.log(shape / np.mean(r))
    A = np.ones((r.size, 1))
    loss = _loss(r, r_thresh, shape)

    def objective(theta):
        v, d1, _ = loss(A @ theta)
        return v, A.T @ d1

    def hess(theta):
        _, _, d2 = loss(A @ theta)
        return np.array([[d2.sum()]])

    res = numerics.minimize(objective, [init], tol=1e-10 * r.size, hess=hess)
    return float(np.exp(res.x[0]))


def _fit_one(problem, r, rt, shape, lam_t, lam_p, theta0):
    if theta0 is None:
        theta0 = np.zeros(problem.dim)
        theta0[0] = np.log(stationary_rate_mle(r, rt, shape))
    return _gam.fit_penalized(problem, _loss(r, rt, shape), lam_t, lam_p, theta0)


def fit_gauge(
    exc: Exceedances,
    kappa_t: int = 10,
    kappa_phi: int = 17,
    lambda_grid=None,
    T: int | None = None,
    fixed_lambda: tuple[float, float] | None = None,
    shape: float = DEFAULT_SHAPE,
    tau: float = 0.8,
    norm=NormKind.L2,
    n_jobs: int = 1,
    cv_rule: str = "one-se",
) -> GaugeGamFit:
    """Penalised truncated-gamma fit of ``log m(phi, t) = beta0 + s(t, phi)``.

    Parameters
    ----------
    exc : Exceedances
        Radii above the stage-one threshold together with those thresholds.
    T : int, optional
        Upper end of the time range; should match the stage-one fit.
    shape : float
        Fixed gamma shape.
    tau : float
        Threshold level, stored on the fit for later return-level work.
    cv_rule : {"one-se", "min"}
        How the cross-validated losses pick the weights.
    """
    pts = exc.points
    r = np.asarray(pts.r, float)
    rt = np.asarray(exc.thresholds, float)
    if r.size < 10:
        raise DataError("gauge fit needs at least 10 exceedances")
    if np.any(r <= rt):
        raise DataError("exceedance radii must exceed their thresholds")
    t = np.asarray(pts.t, float)
    T = int(T or np.max(t))
    problem, kt, kp = _gam.build_problem(t, pts.phi, T, kappa_t, kappa_phi)
    if r.size < 10 * problem.X.shape[1]:
        warnings.warn(
            f"only {r.size} exceedances for {problem.X.shape[1]} basis functions; the fit may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )

    scores = None
    if fixed_lambda is None:
        grid = lambda_grid or _gam.default_lambda_grid()

        def score(rows, eta):
            return trunc_gamma_terms(eta, r[rows], rt[rows], shape)[0]

        def fit_fn(rows, sub, lam_t, lam_p, theta0):
            return _fit_one(sub, r[rows], rt[rows], shape, lam_t, lam_p, theta0)

        lam, scores = _gam.cross_validate(problem, fit_fn, score, t, grid, n_jobs=n_jobs, rule=cv_rule)
    else:
        lam = tuple(float(v) for v in fixed_lambda)
    res = _fit_one(problem, r, rt, shape, lam[0], lam[1], None)
    if not np.all(np.isfinite(res.x)):
        raise ModelError("gauge fit diverged")
    if not res.success:
        logger.warning("gauge fit stopped early: %s (|grad|=%.3g)", res.message, res.grad_norm)
    beta0, coefs = problem.full_coefs(res.x)
    logger.info("gauge stage: lambda_t=%g lambda_phi=%g", lam[0], lam[1])
    return GaugeGamFit(
        beta0, coefs, kt, kp, lam[0], lam[1], NormKind.parse(norm), shape=float(shape), tau=tau, cv_scores=scores
    )


def predict_gauge(fit: GaugeGamFit, phi, t):
    return fit.predict(phi, t)


def _check_rate(m, r_thresh):
    m = np.asarray(m, float)
    r_thresh = np.asarray(r_thresh, float)
    if np.any(~(m > 0)) or np.any(~np.isfinite(m)):
        raise ValueError("rate must be positive and finite")
    if np.any(~(r_thresh >= 0)) or np.any(~np.isfinite(r_thresh)):
        raise ValueError("threshold must be non-negative and finite")
    return m, r_thresh


def _solve_log_sf(target, x0, shape):
    """Smallest ``x >= x0`` with ``log Q(shape, x) = target`` (target <= log Q(x0))."""
    lo = np.array(x0, float)
    hi = np.maximum(lo, 1.0) * 2.0 + shape
    for _ in range(2000):
        short = numerics.log_gamma_sf(hi, shape, 1.0) > target
        if not np.any(short):
            break
        hi = np.where(short, hi * 2.0, hi)
    x = np.clip(lo - target, lo, hi)
    for _ in range(200):
        f = numerics.log_gamma_sf(x, shape, 1.0) - target
        lo = np.where(f > 0, x, lo)
        hi = np.where(f > 0, hi, x)
        # d/dx log Q = -density/Q = -psi/x
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = -np.exp(_log_psi(x, shape)) / x
            xn = x - f / slope
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= 1e-15 * np.maximum(1.0, x)
        x = xn
        if np.all(done):
            break
    return x


def trunc_gamma_conditional_quantile(q, m, r_thresh, shape: float = DEFAULT_SHAPE):
    """Radius ``r >= r_thresh`` at conditional probability ``q`` above the threshold.

    Solves ``[F(r) - F(r_thresh)] / [1 - F(r_thresh)] = q`` for the gamma
    law with the given shape and rate ``m``, working with log-survival
    functions throughout.
    """
    q = np.asarray(q, float)
    if np.any(~np.isfinite(q)) or np.any((q < 0) | (q >= 1)):
        raise ValueError("conditional probability must lie in [0, 1)")
    m, r_thresh = _check_rate(m, r_thresh)
    q, m, r_thresh = np.broadcast_arrays(q, m, r_thresh)
    x0 = m * r_thresh
    target = numerics.log_gamma_sf(x0, shape, 1.0) + np.log1p(-q)
    x = np.where(q > 0, _solve_log_sf(target, x0, shape), x0)
    out = x / m
    return out if out.ndim else float(out)


def trunc_gamma_pit(r, m, r_thresh, shape: float = DEFAULT_SHAPE):
    """Exponential-scale residual ``-log(1 - conditional CDF)`` of a radius above its threshold."""
    r = np.asarray(r, float)
    m, r_thresh = _check_rate(m, r_thresh)
    if np.any(~(r > r_thresh)):
        raise ValueError("radius must exceed its threshold")
    out = numerics.log_gamma_sf(m * r_thresh, shape, 1.0) - numerics.log_gamma_sf(m * r, shape, 1.0)
    return out if out.ndim else float(out)
