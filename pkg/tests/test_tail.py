import numpy as np
import pytest
from scipy import integrate, stats

from nsgeo.errors import ConfigError, ModelError
from nsgeo.geometry import PolarPoint
from nsgeo.numerics import RngStream, laplace_quantile
from nsgeo.quantile import Exceedances
from nsgeo.gauge import trunc_gamma_pit
from nsgeo.tail import (
    KernelAngularDensity,
    estimate_covar,
    fit_angular_density,
    sample_angle,
    simulate_tail,
    von_mises_concentration,
)
from oracles import independence_gauge

TWO_PI = 2 * np.pi


def _angle_cdf(a):
    # angle law of two independent Laplace variables, integrated by quadrature
    return integrate.quad(lambda p: 1.0 / (4.0 * independence_gauge(p) ** 2), 0.0, a, limit=200)[0]


def _kde(angles, times=None, h1=0.25, h2=100.0):
    angles = np.asarray(angles, float)
    times = np.ones_like(angles) if times is None else np.asarray(times, float)
    return KernelAngularDensity(angles, times, h1, h2)


def test_concentration_matches_circular_sd():
    for h in (0.1, 0.25, 0.6):
        k = von_mises_concentration(h)
        x = stats.vonmises.rvs(k, size=200_000, random_state=np.random.default_rng(0))
        assert stats.circstd(x) == pytest.approx(h, rel=0.01)
    with pytest.raises(ConfigError):
        von_mises_concentration(0.0)


def test_density_normalised_over_time():
    g = np.random.default_rng(1)
    d = _kde(g.uniform(0, TWO_PI, 300), g.uniform(1, 1000, 300), 0.3, 50.0)
    step = TWO_PI / d.grid_size
    for t in np.linspace(-200, 1200, 20):
        assert d.grid_values(t).sum() * step == pytest.approx(1.0, abs=1e-6)


def test_density_wraps_around():
    d = _kde([0.01])
    dd = np.array([0.05, 0.2, 0.5])
    assert np.allclose(d.pdf(0.01 + dd, 1.0), d.pdf(np.mod(0.01 - dd, TWO_PI), 1.0), rtol=1e-10)
    assert d.pdf(TWO_PI - 0.01, 1.0) > d.pdf(np.pi, 1.0)


def test_single_exceedance_gives_bump():
    d = _kde([2.0], h1=0.2)
    f = d.grid_values(1.0)
    assert abs(d.grid[np.argmax(f)] - 2.0) <= TWO_PI / d.grid_size
    assert f.max() == pytest.approx(stats.vonmises.pdf(0.0, von_mises_concentration(0.2)), rel=0.01)


def test_uniform_angles_give_flat_density():
    d = _kde(np.random.default_rng(2).uniform(0, TWO_PI, 5000))
    f = d.grid_values(1.0)
    assert np.max(np.abs(f * TWO_PI - 1)) <= 0.10


def test_time_kernel_localises():
    # angles near 1 early, near 4 late
    d = _kde(np.r_[np.full(200, 1.0), np.full(200, 4.0)], np.r_[np.full(200, 1.0), np.full(200, 1000.0)], 0.2, 50.0)
    assert d.pdf(1.0, 1.0) > 50 * d.pdf(4.0, 1.0)
    assert d.pdf(4.0, 1000.0) > 50 * d.pdf(1.0, 1000.0)
    assert np.isfinite(d.grid_values(1e6)).all()


def test_fit_defaults_time_bandwidth():
    pts = PolarPoint(np.ones(5), np.linspace(0, 1, 5), np.array([1.0, 10, 100, 1000, 2000]))
    d = fit_angular_density(Exceedances(pts, np.full(5, 0.5), np.arange(5)))
    assert d.h2 == pytest.approx(100.0)
    with pytest.raises(ConfigError):
        KernelAngularDensity(np.ones(3), np.ones(3), 0.0, 1.0)


def test_sample_angle_ks():
    d = _kde(np.random.default_rng(3).vonmises(1.0, 2.0, 400) % TWO_PI)
    x = sample_angle(d, 1.0, RngStream(4), 10_000)
    cdf = np.cumsum(d.grid_values(1.0)) * (TWO_PI / d.grid_size)
    ks = stats.kstest(x, lambda a: np.interp(a, d.grid + TWO_PI / d.grid_size, cdf, left=0.0))
    assert ks.statistic <= 0.02
    assert np.all((x >= 0) & (x < TWO_PI))


def test_sample_angle_concentrates():
    d = _kde(np.full(50, 3.0), h1=0.05)
    x = sample_angle(d, 1.0, RngStream(5), 5000)
    assert np.mean(np.abs(x - 3.0) < 0.2) > 0.99


def test_sample_angle_deterministic():
    d = _kde([1.0, 2.0, 5.0])
    a = sample_angle(d, 1.0, RngStream(11, 2), 100)
    b = sample_angle(d, 1.0, RngStream(11, 2), 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_angle(d, 1.0, RngStream(12, 2), 100))


def test_sampled_histogram_converges(independence_model):
    edges = np.linspace(0, TWO_PI, 37)
    cdf = np.array([_angle_cdf(a) for a in edges])
    prob = np.diff(cdf)
    dist = []
    for i, n in enumerate((1000, 10_000, 100_000)):
        x = sample_angle(independence_model.angular, 1.0, RngStream(20 + i), n)
        obs = np.histogram(x, edges)[0] / n
        dist.append(np.sum((obs - prob) ** 2 / prob))
    assert dist[0] > dist[1] > dist[2]


def test_independence_angle_density_normalised():
    total = _angle_cdf(TWO_PI)
    assert total == pytest.approx(1.0, abs=1e-10)


def test_simulate_tail_above_threshold_and_pit(independence_model):
    s = simulate_tail(independence_model, 1.0, 100_000, RngStream(6, 2))
    assert np.all(s.r > s.thresholds)
    assert np.allclose(np.hypot(*s.points.T), s.r)
    e = trunc_gamma_pit(s.r, s.rates, s.thresholds)
    assert 0.98 <= e.mean() <= 1.02


def test_simulated_tail_matches_independent_laplace(independence_model):
    # exceedances of two independent Laplace variables beyond the threshold curve
    g = np.random.default_rng(8)
    x = g.laplace(size=(2_000_000, 2))
    r = np.hypot(*x.T)
    phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), TWO_PI)
    keep = r > independence_model.threshold(phi, 1.0)
    s = simulate_tail(independence_model, 1.0, 50_000, RngStream(9, 2))
    ks = stats.ks_2samp(s.points[:, 0], x[keep, 0][:200_000])
    assert ks.pvalue > 0.001


def test_covar_under_independence(independence_model):
    res = estimate_covar(independence_model, 1.0, 0.01, rng=RngStream(1, 3))
    assert res.var == pytest.approx(laplace_quantile(0.01))
    assert res.covar == pytest.approx(np.log(0.02), abs=0.05)
    up = estimate_covar(independence_model, 1.0, 0.01, side="upside", rng=RngStream(1, 3))
    assert up.var == pytest.approx(-np.log(0.02))
    assert up.covar == pytest.approx(-np.log(0.02), abs=0.05)


def test_covar_empirical_route_agrees(independence_model):
    a = estimate_covar(independence_model, 1.0, 0.01, n_sim=200_000, rng=RngStream(2, 3))
    b = estimate_covar(independence_model, 1.0, 0.01, n_sim=400_000, rng=RngStream(2, 3), method="empirical")
    assert a.covar == pytest.approx(b.covar, abs=0.15)


def test_covar_monotone_in_p(independence_model):
    vals = [estimate_covar(independence_model, 1.0, p, rng=RngStream(3, 3)).covar for p in (0.005, 0.01, 0.02)]
    assert vals[0] < vals[1] < vals[2]


def test_covar_deterministic(independence_model):
    a = estimate_covar(independence_model, 1.0, 0.01, n_sim=20_000, rng=RngStream(5, 3))
    b = estimate_covar(independence_model, 1.0, 0.01, n_sim=20_000, rng=RngStream(5, 3))
    assert a.covar == b.covar


def test_covar_errors(independence_model):
    with pytest.raises(ValueError):
        estimate_covar(independence_model, 1.0, 0.6)
    with pytest.raises(ValueError):
        estimate_covar(independence_model, 1.0, 0.01, side="sideways")
    with pytest.raises(ValueError):
        estimate_covar(independence_model, 1.0, 0.01, method="magic")
    # VaR inside the threshold curve
    with pytest.raises(ModelError):
        estimate_covar(independence_model, 1.0, 0.2)
    with pytest.raises(ModelError):
        estimate_covar(independence_model, 1.0, 0.01, n_sim=1000, method="empirical")
