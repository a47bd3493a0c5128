"""Special functions, distributions, seeded random streams and a smooth minimizer.

The incomplete gamma routines are vectorised over numpy arrays and return
log-probabilities where the fitting code needs them, so truncation terms far
into the tail never underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

__all__ = [
    "RngStream",
    "GammaParams",
    "gamma_cdf",
    "gamma_sf",
    "log_gamma_cdf",
    "log_gamma_sf",
    "gamma_quantile",
    "laplace_cdf",
    "laplace_quantile",
    "laplace_logsf",
    "laplace_from_logsf",
    "minimize",
    "MinimizeResult",
    "log1mexp",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 1000


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with the same pair replay the same draws. Distinct ``stream_id``
    values are derived through :class:`numpy.random.SeedSequence` spawn keys,
    so replicates can run in any order without coupling their draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Sub-stream for replicate ``index`` of this stream."""
        return RngStream(self.seed, self.stream_id * 1_000_003 + int(index) + 1)


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0) or not (
            math.isfinite(self.shape) and math.isfinite(self.rate)
        ):
            raise ValueError(f"gamma parameters must be positive and finite, got {self}")


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def log1mexp(a):
    """``log(1 - exp(a))`` for ``a <= 0``, accurate at both ends."""
    a = np.minimum(np.asarray(a, float), 0.0)
    with np.errstate(divide="ignore"):
        return np.where(a > -0.6931471805599453, np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


def _series_logp(a, x):
    # log P(a, x) from the power series; accurate for x < a + 1
    term = np.ones_like(x) / a
    total = term.copy()
    ap = a.copy()
    for _ in range(_MAX_TERMS):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        if np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    with np.errstate(divide="ignore"):
        return np.log(total) - x + a * np.log(x) - gammaln(a)


def _cf_logq(a, x):
    # log Q(a, x) from the modified Lentz continued fraction; x >= a + 1
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= _EPS):
            break
    return np.log(h) - x + a * np.log(x) - gammaln(a)


def _log_pq(a, x):
    """Return (log P(a,x), log Q(a,x)) elementwise for x >= 0."""
    a, x = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
    a = a.astype(float).copy()
    x = x.astype(float).copy()
    logp = np.empty_like(x)
    logq = np.empty_like(x)
    zero = x <= 0
    logp[zero] = -np.inf
    logq[zero] = 0.0
    lo = (~zero) & (x < a + 1.0)
    hi = (~zero) & ~lo
    if np.any(lo):
        lp = _series_logp(a[lo], x[lo])
        logp[lo] = lp
        logq[lo] = log1mexp(lp)
    if np.any(hi):
        lq = _cf_logq(a[hi], x[hi])
        logq[hi] = lq
        logp[hi] = log1mexp(lq)
    return logp, logq


def _integer_shape_logq(k: int, x):
    # Q(k, x) = exp(-x) * sum_{j<k} x^j / j!
    x = np.asarray(x, float)
    acc = np.ones_like(x)
    term = np.ones_like(x)
    for j in range(1, k):
        term = term * x / j
        acc = acc + term
    return np.log(acc) - x


def log_gamma_sf(r, shape: float, rate):
    """log of the gamma survival function ``1 - F(r; shape, rate)``.

    Integer shapes use the finite Poisson-sum identity, which stays exact
    arbitrarily far into the upper tail.
    """
    r = np.asarray(r, float)
    rate = np.asarray(rate, float)
    x = rate * r
    if float(shape).is_integer() and shape <= 50:
        return _integer_shape_logq(int(shape), np.maximum(x, 0.0))
    return _log_pq(shape, np.maximum(x, 0.0))[1]


def log_gamma_cdf(r, shape: float, rate):
    r = np.asarray(r, float)
    return _log_pq(shape, np.maximum(np.asarray(rate, float) * r, 0.0))[0]


def gamma_cdf(r, p: GammaParams):
    """Regularised lower incomplete gamma ``P(shape, rate * r)``."""
    r = np.asarray(r, float)
    _check_finite(r)
    if np.any(r < 0):
        raise ValueError("gamma_cdf requires r >= 0")
    logp, _ = _log_pq(p.shape, p.rate * r)
    out = np.exp(logp)
    return out if out.ndim else float(out)


def gamma_sf(r, p: GammaParams):
    r = np.asarray(r, float)
    _check_finite(r)
    out = np.exp(log_gamma_sf(r, p.shape, p.rate))
    return out if out.ndim else float(out)


def gamma_quantile(q, p: GammaParams, tol: float = 1e-13):
    """Inverse of :func:`gamma_cdf` by safeguarded Newton iteration on log-scale.

    Works on ``log P`` for lower quantiles and ``log Q`` for upper ones, so
    that probabilities near 1 keep their precision.
    """
    q = np.asarray(q, float)
    _check_finite(q)
    if np.any((q < 0) | (q >= 1)):
        raise ValueError("gamma_quantile requires 0 <= q < 1")
    a = p.shape
    out = np.zeros_like(q)
    pos = q > 0
    if not np.any(pos):
        return out if out.ndim else float(out)
    qq = q[pos]
    # bracket in x = rate * r
    lo = np.zeros_like(qq)
    hi = np.maximum(a, 1.0) * 2.0 + 10.0 * np.ones_like(qq)
    while True:
        below = np.exp(_log_pq(a, hi)[0]) < qq
        if not np.any(below):
            break
        hi = np.where(below, hi * 2.0, hi)
    x = 0.5 * (lo + hi)
    upper = qq > 0.5
    target = np.where(upper, np.log1p(-qq), np.log(qq))
    for _ in range(200):
        logp, logq = _log_pq(a, x)
        val = np.where(upper, logq, logp)
        # keep the bracket: F(x) < q  <=>  x too small
        small = np.where(upper, val > target, val < target)
        lo = np.where(small, x, lo)
        hi = np.where(small, hi, x)
        logpdf = (a - 1.0) * np.log(np.maximum(x, _TINY)) - x - gammaln(a)
        # d/dx log P = pdf/P ; d/dx log Q = -pdf/Q
        deriv = np.where(upper, -np.exp(logpdf - logq), np.exp(logpdf - logp))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (val - target) / deriv
        xn = x - step
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= tol * np.maximum(1.0, x)
        x = xn
        if np.all(done):
            break
    out[pos] = x / p.rate
    return out if out.ndim else float(out)


def laplace_quantile(u):
    """Standard Laplace quantile: ``log(2u)`` below the median, ``-log(2(1-u))`` above."""
    u = np.asarray(u, float)
    _check_finite(u)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("laplace_quantile requires 0 < u < 1")
    out = np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))
    return out if out.ndim else float(out)


def laplace_cdf(x):
    x = np.asarray(x, float)
    _check_finite(x)
    out = np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))
    return out if out.ndim else float(out)


def laplace_logsf(x):
    x = np.asarray(x, float)
    return np.where(x >= 0, np.log(0.5) - np.maximum(x, 0.0), np.log1p(-0.5 * np.exp(np.minimum(x, 0.0))))


def laplace_from_logsf(logsf):
    """Laplace value with survival probability ``exp(logsf)``; exact in the upper tail."""
    logsf = np.asarray(logsf, float)
    upper = logsf <= np.log(0.5)
    # lower half: cdf = 1 - sf, x = log(2 cdf)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower_val = np.log(2.0) + log1mexp(logsf)
    return np.where(upper, -np.log(2.0) - logsf, lower_val)


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    success: bool
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    init,
    tol: float = 1e-8,
    max_iter: int = 500,
    hess: Callable[[np.ndarray], np.ndarray] | None = None,
) -> MinimizeResult:
    """Minimise a smooth function given its value and gradient.

    Without ``hess`` this is BFGS with an Armijo backtracking line search.
    When ``hess`` is supplied the search direction is the (damped) Newton
    step instead, which is what the penalised spline fits use.

    Stops once the gradient sup-norm is at most ``tol``. Non-finite trial
    values shrink the step; if no finite decrease can be found the best
    iterate is returned with ``success=False``.
    """
    x = np.array(init, dtype=float)
    f, g = objective(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective is not finite at the initial point")
    n = x.size
    hinv = np.eye(n)
    scaled = False
    for it in range(max_iter):
        gmax = np.max(np.abs(g)) if n else 0.0
        if gmax <= tol:
            return MinimizeResult(x, f, g, it, True, "gradient tolerance reached")
        if hess is not None:
            d = _newton_direction(hess(x), g)
        else:
            d = -hinv @ g
            if g @ d >= 0:
                hinv = np.eye(n)
                d = -g
        slope = g @ d
        step = 1.0
        accepted = False
        for _ in range(60):
            xn = x + step * d
            fn, gn = objective(xn)
            if np.isfinite(fn) and np.all(np.isfinite(gn)) and fn <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return MinimizeResult(x, f, g, it, False, "line search failed to find a finite decrease")
        s = xn - x
        y = gn - g
        x, f, g = xn, fn, gn
        if hess is None:
            sy = s @ y
            if sy > 1e-12 * np.sqrt((s @ s) * (y @ y)):
                if not scaled:
                    hinv = np.eye(n) * (sy / (y @ y))
                    scaled = True
                rho = 1.0 / sy
                hy = hinv @ y
                hinv = hinv - rho * (np.outer(s, hy) + np.outer(hy, s)) + (rho * rho * (y @ hy) + rho) * np.outer(s, s)
    gmax = np.max(np.abs(g)) if n else 0.0
    return MinimizeResult(x, f, g, max_iter, gmax <= tol, "maximum iterations reached")


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    h = 0.5 * (h + h.T)
    scale = max(np.max(np.abs(np.diag(h))), 1e-12)
    shift = 0.0
    for _ in range(30):
        try:
            c = np.linalg.cholesky(h + shift * np.eye(h.shape[0]))
            z = np.linalg.solve(c, -g)
            return np.linalg.solve(c.T, z)
        except np.linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-10 * scale)
    return -g / scale
