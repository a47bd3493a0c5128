"""Goodness-of-fit checks for a fitted tail model.

Two diagnostics: an exponential QQ comparison of the truncated-gamma
probability integral transforms, with pointwise order-statistic bands,
and a comparison of nominal and empirical return-level-set probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gauge import trunc_gamma_pit
from .geometry import return_level_radius, to_polar
from .quantile import Exceedances
from .series import BivariateSeries
from .tail import TailModel

__all__ = [
    "QQDiagnostic",
    "RLDiagnostic",
    "qq_exponential",
    "exponential_bands",
    "rl_probability_diagnostic",
    "default_p_grid",
]


@dataclass
class QQDiagnostic:
    sorted_pit: np.ndarray
    theoretical: np.ndarray
    lower_band: np.ndarray
    upper_band: np.ndarray

    def inside(self) -> np.ndarray:
        return (self.sorted_pit >= self.lower_band) & (self.sorted_pit <= self.upper_band)

    def fraction_inside(self) -> float:
        return float(np.mean(self.inside()))


def exponential_bands(n: int, level: float = 0.95):
    """Theoretical standard-exponential order statistics and pointwise bands.

    The ``k``-th uniform order statistic is Beta(k, n + 1 - k); bands are
    its ``(1 - level)/2`` and ``(1 + level)/2`` quantiles mapped through
    ``-log(1 - q)``.
    """
    k = np.arange(1, n + 1)
    theo = -np.log1p(-k / (n + 1.0))
    a = 0.5 * (1.0 - level)
    lo = -np.log1p(-stats.beta.ppf(a, k, n + 1 - k))
    # 1 - U_(k) is Beta(n + 1 - k, k); its lower quantile keeps precision near k = n
    hi = -np.log(stats.beta.ppf(a, n + 1 - k, k))
    return theo, lo, hi


def qq_exponential(model: TailModel, exc: Exceedances, level: float = 0.95) -> QQDiagnostic:
    """Exponential QQ diagnostic of the exceedances under the model's radial law."""
    pts = exc.points
    thr = model.threshold(pts.phi, pts.t)
    rate = model.rate(pts.phi, pts.t)
    pit = np.sort(trunc_gamma_pit(pts.r, rate, thr, shape=model.shape))
    theo, lo, hi = exponential_bands(pit.size, level)
    return QQDiagnostic(pit, theo, lo, hi)


@dataclass
class RLDiagnostic:
    p: np.ndarray
    p_hat: np.ndarray

    @property
    def nominal(self) -> np.ndarray:
        return -np.log1p(-self.p)

    @property
    def empirical(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log1p(-self.p_hat)

    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical - self.nominal)))


def default_p_grid(tau: float = 0.8, hi: float = 0.99, n: int = 200) -> np.ndarray:
    return np.linspace(tau, hi, n)


def rl_probability_diagnostic(model: TailModel, series: BivariateSeries, p_grid=None) -> RLDiagnostic:
    """Fraction of observations inside the fitted ``p``-level return set, for each ``p``.

    Angles and times of the data must lie in the fitted range; nothing is
    clamped.
    """
    tau = model.tau
    p_grid = default_p_grid(tau) if p_grid is None else np.asarray(p_grid, float)
    if np.any(p_grid < tau - 1e-12) or np.any(p_grid > 0.995):
        raise ValueError(f"return-level probabilities must lie in [tau={tau}, 0.995]")
    keep = np.any(series.x != 0, axis=1)
    pol = to_polar(series.x[keep], model.norm, series.t[keep])
    thr = model.threshold(pol.phi, pol.t)
    rate = model.rate(pol.phi, pol.t)
    p_hat = np.empty(p_grid.size)
    n = series.x.shape[0]
    # points at the origin are inside every set
    n_origin = n - pol.r.size
    for i, p in enumerate(p_grid):
        rp = thr if p <= tau else return_level_radius(p, tau, thr, rate, shape=model.shape)
        p_hat[i] = (np.count_nonzero(pol.r <= rp) + n_origin) / n
    return RLDiagnostic(p_grid, p_hat)
