"""Joint-tail simulation and conditional risk measures from a fitted model.

Exceedance angles get a kernel estimate of their density given time (von
Mises in angle, Gaussian weights in time). Tail points are drawn by first
sampling an angle and then a radius from the truncated-gamma law above the
threshold. VaR and CoVaR follow from the simulated tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.special import i0e, i1e

from . import numerics
from .errors import ConfigError, ModelError
from .gauge import trunc_gamma_conditional_quantile
from .geometry import NormKind, default_phi_grid, unit_point
from .quantile import Exceedances

__all__ = [
    "AngularDensity",
    "KernelAngularDensity",
    "FunctionAngularDensity",
    "TailModel",
    "TailSample",
    "CovarResult",
    "von_mises_concentration",
    "fit_angular_density",
    "sample_angle",
    "simulate_tail",
    "estimate_covar",
]

TWO_PI = 2.0 * np.pi
MIN_CONDITIONING = 500


def von_mises_concentration(circular_sd: float) -> float:
    """Concentration whose von Mises law has circular standard deviation ``circular_sd``.

    Uses ``sd = sqrt(-2 log R)`` with mean resultant length ``R = I1(k)/I0(k)``.
    """
    if not circular_sd > 0:
        raise ConfigError("angular bandwidth must be positive")
    target = np.exp(-0.5 * circular_sd**2)
    if target < 1e-6:
        return 0.0
    f = lambda k: i1e(k) / i0e(k) - target  # noqa: E731
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12))


class AngularDensity:
    """Density of exceedance angles given time, tabulated on a periodic grid."""

    grid_size: int = 720

    def _raw(self, phi: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def grid(self) -> np.ndarray:
        return default_phi_grid(self.grid_size)

    def grid_values(self, t) -> np.ndarray:
        """Normalised density on :attr:`grid` (rectangle rule integrates to one)."""
        raw = self._raw(self.grid, float(t))
        total = raw.sum() * (TWO_PI / self.grid_size)
        if not total > 0:
            raise ModelError(f"angular density vanishes at t={t}")
        return raw / total

    def pdf(self, phi, t) -> np.ndarray:
        phi = np.asarray(phi, float)
        raw_grid = self._raw(self.grid, float(t))
        total = raw_grid.sum() * (TWO_PI / self.grid_size)
        return self._raw(np.mod(phi.ravel(), TWO_PI), float(t)).reshape(phi.shape) / total


@dataclass
class KernelAngularDensity(AngularDensity):
    """Nadaraya-Watson estimate of the exceedance-angle density given time.

    ``h1`` is the circular standard deviation of the von Mises angle kernel
    (radians), ``h2`` the standard deviation of the Gaussian time kernel.
    """

    angles: np.ndarray
    times: np.ndarray
    h1: float
    h2: float

    def __post_init__(self):
        if not (self.h1 > 0 and self.h2 > 0):
            raise ConfigError("bandwidths h1 and h2 must be positive")
        self.angles = np.asarray(self.angles, float)
        self.times = np.asarray(self.times, float)
        if self.angles.size == 0:
            raise ModelError("no exceedances for the angular density")
        self.kappa = von_mises_concentration(self.h1)

    def time_weights(self, t: float) -> np.ndarray:
        z2 = ((self.times - t) / self.h2) ** 2
        # shift keeps the largest weight at one so far-away t does not underflow
        return np.exp(-0.5 * (z2 - z2.min()))

    def _raw(self, phi, t):
        w = self.time_weights(t)
        k = np.exp(self.kappa * (np.cos(phi[:, None] - self.angles[None, :]) - 1.0))
        return k @ w / w.sum()


@dataclass
class FunctionAngularDensity(AngularDensity):
    """Angular density given as a callable ``f(phi, t)`` (need not be normalised)."""

    fn: Callable

    def _raw(self, phi, t):
        return np.asarray(self.fn(phi, t), float) * np.ones_like(phi)


def fit_angular_density(exc: Exceedances, h1: float = 0.25, h2: float | None = None, T: int | None = None):
    """Kernel estimate of the exceedance-angle density given time.

    ``h2`` defaults to ``T / 20`` with ``T`` the largest time index.
    """
    pts = exc.points if isinstance(exc, Exceedances) else exc
    if len(pts) == 0:
        raise ModelError("no exceedances for the angular density")
    T = T or float(np.max(pts.t))
    if h2 is None:
        h2 = T / 20.0
    return KernelAngularDensity(np.asarray(pts.phi, float), np.asarray(pts.t, float), float(h1), float(h2))


def sample_angle(density: AngularDensity, t, rng, n: int = 1) -> np.ndarray:
    """Inverse-CDF draws on the density grid, linear within cells.

    ``rng`` is an :class:`~nsgeo.numerics.RngStream` or a numpy Generator.
    """
    gen = rng.generator() if isinstance(rng, numerics.RngStream) else rng
    f = density.grid_values(t)
    step = TWO_PI / f.size
    cells = 0.5 * (f + np.roll(f, -1)) * step
    cdf = np.concatenate([[0.0], np.cumsum(cells)])
    cdf /= cdf[-1]
    u = gen.uniform(size=n)
    edges = np.append(density.grid, TWO_PI)
    out = np.interp(u, cdf, edges)
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass
class TailModel:
    """Threshold surface, gauge surface and angular density; the fitted joint tail.

    ``quantile_fit`` and ``gauge_fit`` need ``predict(phi, t)``;
    ``quantile_fit.tau`` and ``gauge_fit.shape`` are used when present.
    ``margins`` optionally holds one marginal pipeline per component.
    """

    quantile_fit: object
    gauge_fit: object
    angular: AngularDensity
    norm: NormKind = NormKind.L2
    margins: tuple | None = None

    @property
    def tau(self) -> float:
        return float(getattr(self.quantile_fit, "tau", 0.8))

    @property
    def shape(self) -> float:
        return float(getattr(self.gauge_fit, "shape", 2.0))

    def threshold(self, phi, t):
        return self.quantile_fit.predict(phi, t)

    def rate(self, phi, t):
        return self.gauge_fit.predict(phi, t)


@dataclass
class TailSample:
    points: np.ndarray
    phi: np.ndarray
    r: np.ndarray
    thresholds: np.ndarray
    rates: np.ndarray


def simulate_tail(model: TailModel, t, n: int, rng) -> TailSample:
    """``n`` points from the fitted law of ``X_t`` given ``R_t`` above its threshold."""
    gen = rng.generator() if isinstance(rng, numerics.RngStream) else rng
    phi = sample_angle(model.angular, t, gen, n)
    tt = np.full(n, float(t))
    thr = np.asarray(model.threshold(phi, tt), float)
    m = np.asarray(model.rate(phi, tt), float)
    u = gen.uniform(size=n)
    r = trunc_gamma_conditional_quantile(u, m, thr, shape=model.shape)
    pts = np.asarray(r)[:, None] * unit_point(phi, model.norm)
    return TailSample(pts, phi, np.asarray(r), thr, m)


@dataclass
class CovarResult:
    t: float
    p: float
    side: str
    var: float
    covar: float
    n_conditioning: float
    var_original: float | None = None
    covar_original: float | None = None


def _radial_logsf(r, m, thr, shape):
    # log P(R > r | exceedance) for r >= thr
    x = np.maximum(r, thr)
    return numerics.log_gamma_sf(m * x, shape, 1.0) - numerics.log_gamma_sf(m * thr, shape, 1.0)


def _covar_integrated(v, m, thr, shape, var, p):
    """CoVaR with radii integrated out given sampled angles (downside orientation)."""
    use = v[:, 0] < 0
    v, m, thr = v[use], m[use], thr[use]
    a = var / v[:, 0]
    s_cond = np.exp(_radial_logsf(a, m, thr, shape))
    denom = s_cond.sum()
    v2 = v[:, 1]
    neg, pos = v2 < 0, v2 > 0

    def joint(c):
        out = np.zeros_like(a)
        if c < 0:
            out[neg] = np.exp(_radial_logsf(np.maximum(a[neg], c / v2[neg]), m[neg], thr[neg], shape))
        else:
            out[~pos] = s_cond[~pos]
            b = c / v2[pos]
            upper = np.exp(_radial_logsf(np.maximum(b, a[pos]), m[pos], thr[pos], shape))
            out[pos] = s_cond[pos] - upper
        return out.sum() / denom - p

    lo, hi = -10.0, 10.0
    while joint(lo) > 0:
        lo *= 2.0
    while joint(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(joint, lo, hi, xtol=1e-12)), denom


def estimate_covar(
    model: TailModel,
    t,
    p: float = 0.01,
    side: str = "downside",
    n_sim: int = 100_000,
    rng=None,
    method: str = "integrated",
) -> CovarResult:
    """VaR and CoVaR of the second component given an extreme first component.

    Downside: ``VaR = F^{-1}(p)`` and CoVaR is the ``p``-quantile of ``X2``
    given ``X1 <= VaR``. Upside mirrors this at ``1 - p``.

    ``method="empirical"`` takes the quantile of simulated tail points with
    ``X1`` beyond VaR. ``method="integrated"`` (default) simulates only
    the angles and integrates the radial law exactly, then solves for the
    quantile with a root finder; this removes the radial Monte Carlo noise.
    """
    if side not in ("downside", "upside"):
        raise ValueError("side must be 'downside' or 'upside'")
    if not 0 < p < 0.5:
        raise ValueError("p must lie in (0, 0.5)")
    if rng is None:
        rng = numerics.RngStream(0, 2)
    gen = rng.generator() if isinstance(rng, numerics.RngStream) else rng
    sign = 1.0 if side == "downside" else -1.0
    var = numerics.laplace_quantile(p)
    grid = model.angular.grid
    thr_max = float(np.max(model.threshold(grid, np.full(grid.size, float(t)))))
    if abs(var) <= thr_max:
        raise ModelError(
            f"|VaR|={abs(var):.3f} does not exceed the largest threshold radius {thr_max:.3f}; "
            "the conditioning event leaves the modelled region"
        )
    if method == "integrated":
        phi = sample_angle(model.angular, t, gen, n_sim)
        tt = np.full(n_sim, float(t))
        thr = np.asarray(model.threshold(phi, tt), float)
        m = np.asarray(model.rate(phi, tt), float)
        v = sign * unit_point(phi, model.norm)
        covar, mass = _covar_integrated(v, m, thr, model.shape, var, p)
        n_cond = float(mass)
    elif method == "empirical":
        sample = simulate_tail(model, t, n_sim, gen)
        x = sign * sample.points
        sel = x[:, 0] <= var
        n_cond = float(sel.sum())
        if n_cond < MIN_CONDITIONING:
            raise ModelError(f"only {int(n_cond)} simulated points beyond VaR; increase n_sim")
        covar = float(np.quantile(x[sel, 1], p))
    else:
        raise ValueError("method must be 'integrated' or 'empirical'")
    if n_cond < MIN_CONDITIONING:
        raise ModelError(f"only {n_cond:.0f} expected points beyond VaR; increase n_sim")
    res = CovarResult(float(t), p, side, sign * var, sign * covar, n_cond)
    if model.margins is not None:
        i = int(round(float(t))) - 1
        m1, m2 = model.margins
        res.var_original = float(m1.from_laplace(res.var, m1.garch.sigma[i]))
        res.covar_original = float(m2.from_laplace(res.covar, m2.garch.sigma[i]))
    return res
