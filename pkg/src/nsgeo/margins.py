"""Marginal standardisation of financial returns.

Log-returns are filtered by a GARCH(1,1) volatility model; the standardised
residuals get a semi-parametric distribution (empirical body, generalised
Pareto tails) and are mapped to standard Laplace margins. Every step is
invertible so simulated Laplace-scale points can be taken back to returns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal
from scipy.special import expit

from . import numerics
from .errors import DataError

__all__ = [
    "GarchFit",
    "GpdParams",
    "MarginalModel",
    "MarginalPipeline",
    "log_returns",
    "zero_return_mask",
    "fit_garch11",
    "garch_variance_path",
    "simulate_garch11",
    "filter_residuals",
    "fit_gpd",
    "gpd_logsf",
    "fit_margin",
    "to_laplace",
    "from_laplace",
    "margin_cdf",
    "rolling_laplace_check",
    "fit_pipeline",
]

logger = logging.getLogger(__name__)

MAX_PERSISTENCE = 0.999


def log_returns(prices) -> np.ndarray:
    """``log(P_t / P_{t-1})``; zero returns are kept and can be found with :func:`zero_return_mask`."""
    p = np.asarray(prices, float)
    if p.ndim != 1 or p.size < 2:
        raise DataError("need at least two prices")
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise DataError("prices must be positive and finite")
    return np.diff(np.log(p))


def zero_return_mask(*series) -> np.ndarray:
    """True where any of the aligned return series is exactly zero."""
    return np.any(np.column_stack([np.asarray(s) == 0 for s in series]), axis=1)


# GARCH(1,1) ---------------------------------------------------------------


@dataclass
class GarchFit:
    mu: float
    c: float
    a: float
    b: float
    sigma2_path: np.ndarray
    sigma2_init: float
    converged: bool = True

    def __post_init__(self):
        if not (self.c > 0 and self.a >= 0 and self.b >= 0 and self.a + self.b < 1):
            raise ValueError(f"invalid GARCH parameters c={self.c}, a={self.a}, b={self.b}")

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.sigma2_path)


def garch_variance_path(q, mu, c, a, b, sigma2_init) -> np.ndarray:
    """Conditional variances ``c + a (Q_{t-1} - mu)^2 + b sigma^2_{t-1}`` started at ``sigma2_init``."""
    e2 = (np.asarray(q, float) - mu) ** 2
    out = np.empty(e2.size)
    out[0] = sigma2_init
    if e2.size > 1:
        drive = c + a * e2[:-1]
        out[1:], _ = signal.lfilter([1.0], [1.0, -b], drive, zi=[b * sigma2_init])
    return out


def _unpack(theta, scale):
    mu = theta[0] * np.sqrt(scale)
    c = scale * np.exp(theta[1])
    persist = MAX_PERSISTENCE * expit(theta[2])
    share = expit(theta[3])
    return mu, c, persist * share, persist * (1.0 - share)


def _garch_nll(theta, q, scale, s0):
    mu, c, a, b = _unpack(theta, scale)
    s2 = garch_variance_path(q, mu, c, a, b, s0)
    if np.any(s2 <= 0) or not np.all(np.isfinite(s2)):
        return np.inf
    return 0.5 * float(np.sum(np.log(s2) + (q - mu) ** 2 / s2)) / q.size


def fit_garch11(q) -> GarchFit:
    """Gaussian quasi-maximum-likelihood GARCH(1,1) with constant mean.

    The persistence ``a + b`` is kept below 0.999 by construction.
    """
    q = np.asarray(q, float)
    if q.size < 100:
        raise DataError("GARCH fit needs at least 100 returns")
    if not np.all(np.isfinite(q)):
        raise DataError("returns must be finite")
    v = float(np.var(q))
    if v <= 0:
        raise DataError("returns have zero variance")
    best = None
    # a few starting persistence levels guard against a flat likelihood
    for p0 in (0.9, 0.5):
        theta0 = np.array([np.mean(q) / np.sqrt(v), np.log(1.0 - p0), np.log(p0 / MAX_PERSISTENCE / (1 - p0 / MAX_PERSISTENCE)), np.log(0.1 / 0.9)])
        res = optimize.minimize(_garch_nll, theta0, args=(q, v, v), method="BFGS", options={"gtol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
    mu, c, a, b = _unpack(best.x, v)
    if not best.success and np.max(np.abs(best.jac)) > 1e-5:
        logger.warning("GARCH optimiser reported: %s", best.message)
    return GarchFit(float(mu), float(c), float(a), float(b), garch_variance_path(q, mu, c, a, b, v), v, bool(best.success))


def simulate_garch11(n, mu, c, a, b, rng: numerics.RngStream, burn: int = 1000):
    """Returns and innovations from a Gaussian GARCH(1,1) after a burn-in."""
    gen = rng.generator()
    z = gen.standard_normal(n + burn)
    q = np.empty(n + burn)
    s2 = c / (1.0 - a - b)
    for i in range(n + burn):
        q[i] = mu + np.sqrt(s2) * z[i]
        s2 = c + a * (q[i] - mu) ** 2 + b * s2
    return q[burn:], z[burn:]


def filter_residuals(fit: GarchFit, q) -> np.ndarray:
    """Standardised residuals ``(Q_t - mu) / sigma_t``."""
    q = np.asarray(q, float)
    s2 = fit.sigma2_path if q.size == fit.sigma2_path.size else garch_variance_path(
        q, fit.mu, fit.c, fit.a, fit.b, fit.sigma2_init
    )
    return (q - fit.mu) / np.sqrt(s2)


# generalised Pareto tails -------------------------------------------------


@dataclass(frozen=True)
class GpdParams:
    sigma: float
    xi: float


def gpd_logsf(y, p: GpdParams):
    """log survival of the generalised Pareto law at excess ``y >= 0``."""
    y = np.asarray(y, float)
    if abs(p.xi) < 1e-9:
        return -y / p.sigma
    z = 1.0 + p.xi * y / p.sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z > 0, -np.log(np.where(z > 0, z, 1.0)) / p.xi, -np.inf)


def gpd_isf_log(logsf, p: GpdParams):
    """Excess with log survival ``logsf``."""
    logsf = np.asarray(logsf, float)
    if abs(p.xi) < 1e-9:
        return -p.sigma * logsf
    return p.sigma / p.xi * np.expm1(-p.xi * logsf)


def _gpd_nll(theta, y):
    ls, xi = theta
    s = np.exp(ls)
    if xi < -0.5:
        return np.inf, np.zeros(2)
    z = 1.0 + xi * y / s
    if np.any(z <= 0):
        return np.inf, np.zeros(2)
    n = y.size
    if abs(xi) < 1e-8:
        val = n * ls + y.sum() / s
        return val, np.array([n - y.sum() / s, 0.0])
    lz = np.log(z)
    val = n * ls + (1.0 + 1.0 / xi) * lz.sum()
    # dz/dls = -xi y / s ; dz/dxi = y / s
    w = (y / s) / z
    g_ls = n - (1.0 + 1.0 / xi) * xi * w.sum()
    g_xi = -lz.sum() / xi**2 + (1.0 + 1.0 / xi) * w.sum()
    return val, np.array([g_ls, g_xi])


def fit_gpd(excess) -> GpdParams:
    """Maximum-likelihood generalised Pareto fit in ``(log sigma, xi)`` with ``xi >= -0.5``."""
    y = np.asarray(excess, float)
    if y.size < 2 or np.any(y < 0):
        raise DataError("GPD fit needs non-negative excesses")
    m, v = y.mean(), y.var()
    # method-of-moments start
    xi0 = float(np.clip(0.5 * (1.0 - m * m / v), -0.4, 0.4)) if v > 0 else 0.1
    s0 = max(m * (1.0 - xi0), 1e-8)
    res = numerics.minimize(lambda th: _gpd_nll(th, y), [np.log(s0), xi0], tol=1e-8 * y.size)
    ls, xi = res.x
    return GpdParams(float(np.exp(ls)), float(xi))


# semi-parametric margin ---------------------------------------------------


@dataclass
class MarginalModel:
    """Empirical body between the ``alpha_tail`` quantiles, GPD beyond them."""

    alpha_tail: float
    l: float
    h: float
    gpd_upper: GpdParams
    gpd_lower: GpdParams
    body: np.ndarray

    def __post_init__(self):
        if not self.l < self.h:
            raise ValueError("lower splice point must be below the upper one")
        self.body = np.asarray(self.body, float)

    @property
    def _ranks(self):
        n = self.body.size
        return np.arange(1, n + 1) / (n + 1.0)


def fit_margin(eps, alpha_tail: float = 0.03, min_exceedances: int = 30) -> MarginalModel:
    """Fit the two-tailed semi-parametric margin to residuals ``eps``.

    The splice points are the ``alpha_tail`` and ``1 - alpha_tail`` quantiles
    of the ``k/(n+1)`` plotting positions, so the distribution function is
    continuous there.
    """
    e = np.sort(np.asarray(eps, float))
    if not 0 < alpha_tail < 0.5:
        raise ValueError("alpha_tail must lie in (0, 0.5)")
    if not np.all(np.isfinite(e)):
        raise DataError("residuals must be finite")
    l, h = np.quantile(e, [alpha_tail, 1.0 - alpha_tail], method="weibull")
    up = e[e > h] - h
    lo = l - e[e < l]
    for name, exc in (("upper", up), ("lower", lo)):
        if exc.size < min_exceedances:
            raise DataError(f"only {exc.size} exceedances in the {name} tail; need {min_exceedances}")
    return MarginalModel(alpha_tail, float(l), float(h), fit_gpd(up), fit_gpd(lo), e)


def _log_tail_probs(model: MarginalModel, eps):
    """(log F, log(1 - F)) of the semi-parametric margin."""
    shape = np.shape(eps)
    eps = np.atleast_1d(np.asarray(eps, float))
    la = np.log(model.alpha_tail)
    body_u = np.interp(eps, model.body, model._ranks)
    with np.errstate(divide="ignore"):
        logf = np.log(body_u)
        logs = np.log1p(-body_u)
    up = eps > model.h
    dn = eps < model.l
    if np.any(up):
        ls = la + gpd_logsf(eps[up] - model.h, model.gpd_upper)
        logs[up] = ls
        logf[up] = numerics.log1mexp(ls)
    if np.any(dn):
        lf = la + gpd_logsf(model.l - eps[dn], model.gpd_lower)
        logf[dn] = lf
        logs[dn] = numerics.log1mexp(lf)
    return logf.reshape(shape), logs.reshape(shape)


def margin_cdf(model: MarginalModel, eps):
    out = np.exp(_log_tail_probs(model, eps)[0])
    return out if out.ndim else float(out)


def to_laplace(model: MarginalModel, eps):
    """Standard Laplace values with the same distribution-function value as ``eps``."""
    eps = np.asarray(eps, float)
    if not np.all(np.isfinite(eps)):
        raise ValueError("residuals must be finite")
    logf, logs = _log_tail_probs(model, eps)
    if np.any(np.isinf(logf)) or np.any(np.isinf(logs)):
        raise ValueError("value outside the support of the fitted margin")
    # each branch uses the tail probability that is accurate on its side
    out = np.where(logs <= np.log(0.5), -np.log(2.0) - logs, np.log(2.0) + logf)
    return out if out.ndim else float(out)


def from_laplace(model: MarginalModel, x):
    """Inverse of :func:`to_laplace`."""
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, float))
    if not np.all(np.isfinite(x)):
        raise ValueError("Laplace values must be finite")
    la = np.log(model.alpha_tail)
    logs = numerics.laplace_logsf(x)
    logf = numerics.laplace_logsf(-x)
    up = logs < la
    dn = logf < la
    u = np.clip(np.exp(logf), model._ranks[0], model._ranks[-1])
    out = np.interp(u, model._ranks, model.body)
    if np.any(up):
        out[up] = model.h + gpd_isf_log(logs[up] - la, model.gpd_upper)
    if np.any(dn):
        out[dn] = model.l - gpd_isf_log(logf[dn] - la, model.gpd_lower)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def rolling_laplace_check(x, window: int = 1000) -> np.ndarray:
    """Laplace location (median) and scale (mean absolute deviation) per non-overlapping window.

    Returns an ``(n_windows, 2)`` array.
    """
    if window < 200:
        raise ValueError("window must be at least 200")
    x = np.asarray(x, float)
    k = x.size // window
    if k == 0:
        raise DataError("series shorter than one window")
    blocks = x[: k * window].reshape(k, window)
    loc = np.median(blocks, axis=1)
    scale = np.mean(np.abs(blocks - loc[:, None]), axis=1)
    return np.column_stack([loc, scale])


@dataclass
class MarginalPipeline:
    garch: GarchFit
    margin: MarginalModel

    def to_laplace(self, q) -> np.ndarray:
        return to_laplace(self.margin, filter_residuals(self.garch, q))

    def from_laplace(self, x, sigma=None) -> np.ndarray:
        """Returns implied by Laplace values ``x`` at conditional volatilities ``sigma``."""
        sigma = self.garch.sigma if sigma is None else np.asarray(sigma, float)
        return self.garch.mu + sigma * from_laplace(self.margin, x)


def fit_pipeline(q, alpha_tail: float = 0.03) -> MarginalPipeline:
    g = fit_garch11(q)
    return MarginalPipeline(g, fit_margin(filter_residuals(g, q), alpha_tail))
