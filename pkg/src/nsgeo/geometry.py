"""Norms, polar decomposition, boundary sets, tail-dependence coefficients and
return-level curves."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NormKind",
    "PolarPoint",
    "BoundaryCurve",
    "norm",
    "to_polar",
    "unit_point",
    "default_phi_grid",
    "boundary_curve",
    "eta_from_boundary",
    "return_level_radius",
    "return_level_curve",
    "QUADRANTS",
]

TWO_PI = 2.0 * np.pi
QUADRANTS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


class NormKind(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value) -> "NormKind":
        if isinstance(value, NormKind):
            return value
        key = str(value).lower().replace("∞", "inf")
        aliases = {"l1": "l1", "l2": "l2", "linf": "linf", "inf": "linf", "max": "linf"}
        try:
            return cls(aliases[key])
        except KeyError:
            raise ValueError(f"unknown norm {value!r}; expected l1, l2 or linf") from None


def norm(x, kind) -> np.ndarray:
    """Norm of the rows of an ``(n, 2)`` array (or of a single pair)."""
    kind = NormKind.parse(kind)
    x = np.asarray(x, float)
    a, b = np.abs(x[..., 0]), np.abs(x[..., 1])
    if kind is NormKind.L1:
        return a + b
    if kind is NormKind.L2:
        return np.hypot(a, b)
    return np.maximum(a, b)


@dataclass
class PolarPoint:
    """Radius, angle in [0, 2 pi) and time index; arrays broadcast together."""

    r: np.ndarray
    phi: np.ndarray
    t: np.ndarray

    def __len__(self):
        return np.size(self.r)

    def subset(self, mask) -> "PolarPoint":
        return PolarPoint(self.r[mask], self.phi[mask], self.t[mask])


def wrap_angle(phi):
    out = np.mod(phi, TWO_PI)
    # mod can return exactly 2 pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def to_polar(x, kind, t=None) -> PolarPoint:
    x = np.atleast_2d(np.asarray(x, float))
    r = norm(x, kind)
    if np.any(r <= 0):
        raise ValueError("the origin has no polar representation")
    phi = wrap_angle(np.arctan2(x[:, 1], x[:, 0]))
    if t is None:
        t = np.arange(1, r.size + 1, dtype=float)
    return PolarPoint(r, phi, np.asarray(t, float) * np.ones_like(r))


def unit_point(phi, kind) -> np.ndarray:
    """Point of the unit ball of ``kind`` in direction ``phi``; shape ``(..., 2)``."""
    phi = np.asarray(phi, float)
    d = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return d / norm(d, kind)[..., None]


def default_phi_grid(n: int = 720) -> np.ndarray:
    return np.arange(n) * (TWO_PI / n)


@dataclass
class BoundaryCurve:
    t: float
    phi_grid: np.ndarray
    radii: np.ndarray
    points: np.ndarray

    def max_abs_excess(self) -> float:
        """How far the curve leaves the square [-1, 1]^2 (0 if it stays inside)."""
        return float(max(0.0, np.max(np.abs(self.points)) - 1.0))


def boundary_curve(gauge: Callable, t, phi_grid=None, kind=NormKind.L2) -> BoundaryCurve:
    """Points ``v(phi) / m(phi, t)`` of the boundary set at time ``t``.

    ``gauge(phi, t)`` must accept an angle array. Radii are Euclidean lengths
    so curves built with different norms are comparable.
    """
    if phi_grid is None:
        phi_grid = default_phi_grid()
    phi_grid = np.asarray(phi_grid, float)
    m = np.asarray(gauge(phi_grid, t), float) * np.ones_like(phi_grid)
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        raise ValueError("gauge values must be positive and finite")
    pts = unit_point(phi_grid, kind) / m[:, None]
    return BoundaryCurve(float(t), phi_grid, np.hypot(pts[:, 0], pts[:, 1]), pts)


def eta_from_boundary(curve: BoundaryCurve, quadrant=(1, 1)) -> float:
    """Coefficient of tail dependence for one quadrant of a boundary curve.

    Largest ``s`` such that the curve meets ``[s, inf)^2`` after reflecting
    the quadrant onto the positive one, i.e. the maximum over curve points
    of ``min(o1 x1, o2 x2)``. Values above 1 are clamped with a warning.
    """
    o = np.asarray(quadrant, float)
    y = curve.points * o
    inside = (y[:, 0] > 0) & (y[:, 1] > 0)
    if not np.any(inside):
        raise ValueError(f"no boundary points in quadrant {tuple(quadrant)}; use a finer angle grid")
    raw = float(np.max(np.minimum(y[inside, 0], y[inside, 1])))
    if raw > 1.0:
        warnings.warn(f"eta estimate {raw:.4f} exceeds 1 and was clamped", RuntimeWarning, stacklevel=2)
        return 1.0
    return raw


def return_level_radius(p, tau, threshold, rate, shape: float = 2.0):
    """Radius of the ``p``-level return set given the ``tau`` threshold and gauge rate.

    For ``p > tau`` solves the truncated-gamma conditional CDF equal to
    ``(p - tau)/(1 - tau)`` above ``threshold``.
    """
    from .gauge import trunc_gamma_conditional_quantile

    p = np.asarray(p, float)
    if np.any(p < tau - 1e-12) or np.any(p >= 1):
        raise ValueError(f"return level probability must lie in [tau={tau}, 1)")
    q = np.clip((p - tau) / (1.0 - tau), 0.0, None)
    return trunc_gamma_conditional_quantile(q, rate, threshold, shape=shape)


def return_level_curve(quantile_fit, gauge_fit, t, p, phi_grid=None, kind=None) -> BoundaryCurve:
    """Return-level set at probability ``p`` and time ``t``: points ``r^p(phi,t) v(phi)``."""
    if phi_grid is None:
        phi_grid = default_phi_grid()
    phi_grid = np.asarray(phi_grid, float)
    kind = NormKind.parse(kind or quantile_fit.norm)
    thr = quantile_fit.predict(phi_grid, t)
    rate = gauge_fit.predict(phi_grid, t)
    r = return_level_radius(p, quantile_fit.tau, thr, rate, shape=gauge_fit.shape)
    pts = unit_point(phi_grid, kind) * np.asarray(r)[:, None]
    return BoundaryCurve(float(t), phi_grid, np.hypot(pts[:, 0], pts[:, 1]), pts)
