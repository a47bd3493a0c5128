"""Non-stationary bivariate dependence examples on standard Laplace margins.

Five families with parameters that drift linearly (or harmonically) in
time, exact samplers, closed-form or quadrature joint densities, and a
numerical gauge obtained from the density along rays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln, log_ndtr, ndtri_exp

from .geometry import NormKind, unit_point
from .numerics import RngStream, laplace_from_logsf
from .series import BivariateSeries

__all__ = [
    "FAMILIES",
    "CopulaSpec",
    "sample_path",
    "joint_log_density",
    "gauge_oracle",
    "hw_margin_logsf",
    "hw_margin_logpdf",
    "hw_margin_quantile",
]

FAMILIES = ("gaussian_linear", "gaussian_harmonic", "inverted_logistic", "student_t", "huser_wadsworth")
LOG2 = np.log(2.0)

_PARAM_NAMES = {
    "gaussian_linear": ("rho",),
    "gaussian_harmonic": ("rho",),
    "inverted_logistic": ("alpha",),
    "student_t": ("rho", "nu"),
    "huser_wadsworth": ("rho", "delta"),
}


@dataclass(frozen=True)
class CopulaSpec:
    """A dependence family over the horizon ``1..T``.

    ``fixed`` replaces any parameter trajectory by a constant, e.g.
    ``CopulaSpec("gaussian_linear", 100, {"rho": 0.0})`` is independence.
    """

    family: str
    T: int
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if int(self.T) < 1:
            raise ValueError("T must be positive")
        unknown = set(self.fixed) - set(_PARAM_NAMES[self.family])
        if unknown:
            raise ValueError(f"{self.family} has no parameter(s) {sorted(unknown)}")
        p = self.params(np.arange(1, int(self.T) + 1, dtype=float))
        checks = {
            "rho": lambda v: np.all(np.abs(v) < 1),
            "alpha": lambda v: np.all((v > 0) & (v < 1)),
            "nu": lambda v: np.all(v > 0),
            "delta": lambda v: np.all(v > 0),
        }
        for name, vals in p.items():
            if not checks[name](vals):
                raise ValueError(f"{self.family}: parameter {name} leaves its valid range")

    def _frac(self, t):
        t = np.asarray(t, float)
        return (t - 1.0) / (self.T - 1.0) if self.T > 1 else np.zeros_like(t)

    def params(self, t) -> dict:
        """Parameter values at time(s) ``t``."""
        s = self._frac(t)
        f = self.family
        if f == "gaussian_linear":
            p = {"rho": 0.2 + 0.6 * s}
        elif f == "gaussian_harmonic":
            p = {"rho": 0.45 * s + 0.5 * np.sin(2.5 * np.pi * s)}
        elif f == "inverted_logistic":
            p = {"alpha": 0.3 + 0.4 * s}
        elif f == "student_t":
            p = {"rho": 0.5 + 0 * s, "nu": 0.5 + 1.5 * s}
        else:
            p = {"rho": 0.5 + 0 * s, "delta": 0.7 + 1.8 * s}
        for k, v in self.fixed.items():
            p[k] = float(v) + 0 * s
        return p

    def describe(self) -> str:
        extra = ",".join(f"{k}={v}" for k, v in sorted(self.fixed.items()))
        return f"family={self.family} T={self.T}" + (f" fixed={extra}" if extra else "")


# margins ------------------------------------------------------------------


def _laplace_from_sym_logsf(sign, logsf_abs):
    # X = sign * F_L^{-1}(1 - sf) for a symmetric law evaluated at |y|
    return sign * (-LOG2 - logsf_abs)


def _laplace_abs_logsf(x):
    return -LOG2 - np.abs(x)


def _laplace_logpdf(x):
    return -LOG2 - np.abs(x)


def _hw_c(delta):
    delta = np.asarray(delta, float)
    return np.minimum(delta, 1.0 / delta)


def hw_margin_logsf(y, c):
    """log P(Y > |y|) for Y the sum of independent Laplace(1) and Laplace(c), c <= 1."""
    y = np.abs(np.asarray(y, float))
    c = np.asarray(c, float)
    near = np.abs(1.0 - c) < 1e-6
    cs = np.where(near, 0.5, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        gen = -y + np.log1p(-(cs**2) * np.exp(-y * (1.0 / cs - 1.0))) - np.log(2.0 * (1.0 - cs**2))
    lim = -y + np.log(2.0 + y) - np.log(4.0)
    return np.where(near, lim, gen)


def hw_margin_logpdf(y, c):
    y = np.abs(np.asarray(y, float))
    c = np.asarray(c, float)
    near = np.abs(1.0 - c) < 1e-6
    cs = np.where(near, 0.5, c)
    with np.errstate(divide="ignore", invalid="ignore"):
        gen = -y + np.log1p(-cs * np.exp(-y * (1.0 / cs - 1.0))) - np.log(2.0 * (1.0 - cs**2))
    lim = -y + np.log1p(y) - np.log(4.0)
    return np.where(near, lim, gen)


def hw_margin_quantile(logsf, c):
    """``y >= 0`` with ``hw_margin_logsf(y, c) = logsf`` (``logsf <= log 1/2``), by bisection."""
    logsf, c = np.broadcast_arrays(np.asarray(logsf, float), np.asarray(c, float))
    lo = np.zeros(logsf.shape)
    # survival of the sum dominates that of Laplace(1): the root is below -logsf + 2
    hi = np.maximum(-logsf, 0.0) + 4.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = hw_margin_logsf(mid, c) > logsf
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


# samplers -----------------------------------------------------------------


def _gaussian_pairs(rho, gen):
    n = rho.size
    z1 = gen.standard_normal(n)
    z2 = rho * z1 + np.sqrt(1.0 - rho**2) * gen.standard_normal(n)
    return z1, z2


def _gauss_to_laplace(z):
    return _laplace_from_sym_logsf(np.sign(z), log_ndtr(-np.abs(z)))


def sample_path(spec: CopulaSpec, rng: RngStream) -> BivariateSeries:
    """One draw at each ``t = 1..T``, independent across time, on standard Laplace margins."""
    gen = rng.generator()
    t = np.arange(1, spec.T + 1, dtype=float)
    p = spec.params(t)
    f = spec.family
    if f in ("gaussian_linear", "gaussian_harmonic"):
        z1, z2 = _gaussian_pairs(p["rho"], gen)
        x = np.column_stack([_gauss_to_laplace(z1), _gauss_to_laplace(z2)])
    elif f == "student_t":
        nu = p["nu"]
        z1, z2 = _gaussian_pairs(p["rho"], gen)
        w = np.sqrt(gen.chisquare(nu) / nu)
        cols = []
        for z in (z1 / w, z2 / w):
            cols.append(_laplace_from_sym_logsf(np.sign(z), stats.t.logsf(np.abs(z), nu)))
        x = np.column_stack(cols)
    elif f == "inverted_logistic":
        alpha = p["alpha"]
        # logistic extreme-value pair via a gamma mixture over the simplex;
        # E_i = Z * W_i^alpha are the reciprocals of unit Frechet margins
        shape = np.where(gen.uniform(size=t.size) < alpha, 2.0, 1.0)
        z = gen.gamma(shape)
        w1 = gen.uniform(size=t.size)
        e = np.column_stack([z * w1**alpha, z * (1.0 - w1) ** alpha])
        # inverted copula: large E (small Frechet) maps to the upper Laplace tail
        x = _inverted_to_laplace(e)
    else:
        rho, delta = p["rho"], p["delta"]
        z1, z2 = _gaussian_pairs(rho, gen)
        v = np.column_stack([_gauss_to_laplace(z1), _gauss_to_laplace(z2)])
        s = gen.laplace(size=t.size)
        a = np.where(delta < 1.0, delta, 1.0)
        b = np.where(delta < 1.0, 1.0, 1.0 / delta)
        y = a[:, None] * s[:, None] + b[:, None] * v
        c = _hw_c(delta)[:, None]
        x = _laplace_from_sym_logsf(np.sign(y), hw_margin_logsf(y, c))
    return BivariateSeries(t, x, "laplace")


def _inverted_to_laplace(e):
    # P(X > x) = P(E > e) = exp(-e)
    return laplace_from_logsf(-e)


# densities ----------------------------------------------------------------


def _gauss_scores(x):
    # normal scores with the same tail probability as the Laplace value x
    return -np.sign(x) * ndtri_exp(_laplace_abs_logsf(x))


def _gaussian_logc(z1, z2, rho):
    r2 = 1.0 - rho**2
    return -0.5 * np.log(r2) - (rho**2 * (z1**2 + z2**2) - 2.0 * rho * z1 * z2) / (2.0 * r2)


def _gaussian_laplace_logpdf(x1, x2, rho):
    z1, z2 = _gauss_scores(x1), _gauss_scores(x2)
    return _gaussian_logc(z1, z2, rho) + _laplace_logpdf(x1) + _laplace_logpdf(x2)


def _student_logpdf(x1, x2, rho, nu):
    z1 = np.sign(x1) * stats.t.isf(np.exp(_laplace_abs_logsf(x1)), nu)
    z2 = np.sign(x2) * stats.t.isf(np.exp(_laplace_abs_logsf(x2)), nu)
    r2 = 1.0 - rho**2
    q = (z1**2 - 2.0 * rho * z1 * z2 + z2**2) / r2
    log2d = gammaln((nu + 2.0) / 2.0) - gammaln(nu / 2.0) - np.log(nu * np.pi) - 0.5 * np.log(r2)
    log2d = log2d - (nu + 2.0) / 2.0 * np.log1p(q / nu)
    logc = log2d - stats.t.logpdf(z1, nu) - stats.t.logpdf(z2, nu)
    return logc + _laplace_logpdf(x1) + _laplace_logpdf(x2)


def _inverted_logistic_logpdf(x1, x2, alpha):
    def expo(x):
        # E = -log P(X > x) and log dE/dx
        e = np.where(x >= 0, LOG2 + x, -np.log1p(-0.5 * np.exp(np.minimum(x, 0.0))))
        jac = np.where(x >= 0, 0.0, _laplace_logpdf(x) - np.log1p(-0.5 * np.exp(np.minimum(x, 0.0))))
        return e, jac

    e1, j1 = expo(x1)
    e2, j2 = expo(x2)
    l1, l2 = np.log(e1), np.log(e2)
    logs = np.logaddexp(l1 / alpha, l2 / alpha)
    V = np.exp(alpha * logs)
    logv1 = (alpha - 1.0) * logs + (1.0 / alpha - 1.0) * l1
    logv2 = (alpha - 1.0) * logs + (1.0 / alpha - 1.0) * l2
    logmix = np.log((1.0 - alpha) / alpha) + (alpha - 2.0) * logs + (1.0 / alpha - 1.0) * (l1 + l2)
    return -V + np.logaddexp(logv1 + logv2, logmix) + j1 + j2


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _hw_y_logpdf(y1, y2, rho, delta, seg_len=0.5):
    """Joint log density of (Y1, Y2) = a S + b V by quadrature over w = a S."""
    a = delta if delta < 1.0 else 1.0
    b = 1.0 if delta < 1.0 else 1.0 / delta
    span = 40.0 * max(a, b)
    out = np.empty(y1.size)
    for i in range(y1.size):
        pts = np.unique(np.array([0.0, y1[i], y2[i]]))
        edges = np.concatenate([[pts[0] - span], pts, [pts[-1] + span]])
        nodes, wts = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            k = max(1, int(np.ceil((hi - lo) / seg_len)))
            cuts = np.linspace(lo, hi, k + 1)
            half = 0.5 * np.diff(cuts)
            mid = 0.5 * (cuts[:-1] + cuts[1:])
            nodes.append((mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel())
            wts.append((half[:, None] * _GL_WEIGHTS[None, :]).ravel())
        w = np.concatenate(nodes)
        lw = np.log(np.concatenate(wts))
        log_s = -np.log(2.0 * a) - np.abs(w) / a
        log_v = _gaussian_laplace_logpdf((y1[i] - w) / b, (y2[i] - w) / b, rho) - 2.0 * np.log(b)
        terms = lw + log_s + log_v
        mx = terms.max()
        out[i] = mx + np.log(np.exp(terms - mx).sum())
    return out


def _hw_logpdf(x1, x2, rho, delta):
    c = float(_hw_c(delta))
    y1 = np.sign(x1) * hw_margin_quantile(_laplace_abs_logsf(x1), c)
    y2 = np.sign(x2) * hw_margin_quantile(_laplace_abs_logsf(x2), c)
    logy = _hw_y_logpdf(y1, y2, rho, delta)
    return (
        logy
        - hw_margin_logpdf(y1, c)
        - hw_margin_logpdf(y2, c)
        + _laplace_logpdf(x1)
        + _laplace_logpdf(x2)
    )


def joint_log_density(spec: CopulaSpec, t, x) -> np.ndarray:
    """Log joint density on Laplace margins at points ``x`` (shape ``(..., 2)``) and time ``t``."""
    x = np.asarray(x, float)
    if not np.all(np.isfinite(x)):
        raise ValueError("density evaluation needs finite points")
    shape = x.shape[:-1]
    x = x.reshape(-1, 2)
    p = {k: float(np.asarray(v).ravel()[0]) for k, v in spec.params(np.asarray([float(t)])).items()}
    x1, x2 = x[:, 0], x[:, 1]
    f = spec.family
    if f in ("gaussian_linear", "gaussian_harmonic"):
        out = _gaussian_laplace_logpdf(x1, x2, p["rho"])
    elif f == "student_t":
        out = _student_logpdf(x1, x2, p["rho"], p["nu"])
    elif f == "inverted_logistic":
        out = _inverted_logistic_logpdf(x1, x2, p["alpha"])
    else:
        out = _hw_logpdf(x1, x2, p["rho"], p["delta"])
    return out.reshape(shape) if shape else float(out[0])


def gauge_oracle(spec: CopulaSpec, t, phi, norm=NormKind.L2, ladder=(20.0, 30.0, 40.0)) -> np.ndarray:
    """Gauge ``m(phi, t)`` from the density along rays.

    Evaluates ``-log f(u v(phi)) / u`` on the ``ladder`` of radii, fits
    ``g + a/u + b log(u)/u`` and returns ``g``, the value at ``1/u = 0``.
    If the density is not representable the ladder is halved (with a
    warning) until it is.
    """
    phi = np.atleast_1d(np.asarray(phi, float))
    v = unit_point(phi, norm)
    ladder = np.asarray(ladder, float)
    for _ in range(4):
        vals = np.stack([-joint_log_density(spec, t, u * v) / u for u in ladder])
        if np.all(np.isfinite(vals)):
            break
        warnings.warn(f"density not representable on ladder {ladder}; halving it", RuntimeWarning, stacklevel=2)
        ladder = ladder / 2.0
    else:
        raise FloatingPointError("gauge oracle failed: density not representable")
    inv = 1.0 / ladder
    # the log-margin transforms leave log(u)/u terms besides the 1/u term
    A = np.column_stack([np.ones_like(inv), inv, np.log(ladder) * inv])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return coef[0]
