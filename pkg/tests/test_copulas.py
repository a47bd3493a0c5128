import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from nsgeo.copulas import (
    FAMILIES,
    CopulaSpec,
    gauge_oracle,
    hw_margin_logpdf,
    hw_margin_logsf,
    hw_margin_quantile,
    joint_log_density,
    sample_path,
)
from nsgeo.geometry import NormKind, boundary_curve, default_phi_grid, eta_from_boundary
from nsgeo.margins import rolling_laplace_check
from nsgeo.numerics import RngStream

# Gaussian copula (rho = 0.5) on Laplace margins at (2, 2); mpmath change of variables
GAUSS_LOGPDF_22 = -4.499049347606255

ENDPOINTS = {
    "gaussian_linear": ({"rho": 0.2}, {"rho": 0.8}),
    "gaussian_harmonic": ({"rho": 0.0}, {"rho": 0.45 + 0.5 * np.sin(2.5 * np.pi)}),
    "inverted_logistic": ({"alpha": 0.3}, {"alpha": 0.7}),
    "student_t": ({"rho": 0.5, "nu": 0.5}, {"rho": 0.5, "nu": 2.0}),
    "huser_wadsworth": ({"rho": 0.5, "delta": 0.7}, {"rho": 0.5, "delta": 2.5}),
}


@pytest.mark.parametrize("family", FAMILIES)
def test_parameter_endpoints(family):
    spec = CopulaSpec(family, 500)
    first, last = ENDPOINTS[family]
    p1, pT = spec.params(1.0), spec.params(500.0)
    for k, v in first.items():
        assert float(p1[k]) == pytest.approx(v, abs=1e-12)
    for k, v in last.items():
        assert float(pT[k]) == pytest.approx(v, abs=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        CopulaSpec("frank", 10)
    with pytest.raises(ValueError):
        CopulaSpec("gaussian_linear", 10, {"rho": 1.5})
    with pytest.raises(ValueError):
        CopulaSpec("gaussian_linear", 10, {"alpha": 0.5})


@pytest.mark.parametrize("family", FAMILIES)
def test_margins_are_standard_laplace(family):
    x = sample_path(CopulaSpec(family, 25_000), RngStream(11)).x
    for j in range(2):
        chk = rolling_laplace_check(x[:, j], 5000)
        assert np.all(np.abs(chk[:, 0]) <= 0.05)
        assert np.all(np.abs(chk[:, 1] - 1) <= 0.05)


def test_independence_sample_uncorrelated():
    T = 20_000
    x = sample_path(CopulaSpec("gaussian_linear", T, {"rho": 0.0}), RngStream(2)).x
    assert abs(np.corrcoef(x.T)[0, 1]) <= 3 / np.sqrt(T)


def test_sample_path_deterministic():
    a = sample_path(CopulaSpec("student_t", 300), RngStream(4)).x
    b = sample_path(CopulaSpec("student_t", 300), RngStream(4)).x
    assert np.array_equal(a, b)


def test_independence_density():
    spec = CopulaSpec("gaussian_linear", 10, {"rho": 0.0})
    x = np.array([[0.3, -1.2], [4.0, 2.5], [-7.0, 0.1]])
    ref = np.log(0.25) - np.abs(x).sum(axis=1)
    assert np.allclose(joint_log_density(spec, 3, x), ref, atol=1e-12)


def test_gaussian_density_at_point():
    spec = CopulaSpec("gaussian_linear", 10, {"rho": 0.5})
    assert joint_log_density(spec, 1, np.array([2.0, 2.0])) == pytest.approx(GAUSS_LOGPDF_22, abs=1e-10)


def test_density_rejects_nonfinite():
    with pytest.raises(ValueError):
        joint_log_density(CopulaSpec("gaussian_linear", 10), 1, np.array([np.nan, 0.0]))


@pytest.mark.parametrize("family", FAMILIES)
def test_density_symmetric(family):
    spec = CopulaSpec(family, 100)
    g = np.random.default_rng(1)
    x = g.laplace(size=(20, 2)) * 2
    a = joint_log_density(spec, 37, x)
    b = joint_log_density(spec, 37, x[:, ::-1])
    assert np.allclose(a, b, rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("family", FAMILIES)
def test_sampler_matches_density(family):
    # probability of a box from the sampler versus 2-d integration of the density
    T = 10**6
    mid = {k: float(v) for k, v in CopulaSpec(family, T).params(T / 2).items()}
    spec = CopulaSpec(family, 200_000, mid)
    x = sample_path(spec, RngStream(3)).x
    (a, b), (c, d) = (0.5, 2.5), (0.5, 2.5)
    emp = np.mean((x[:, 0] > a) & (x[:, 0] < b) & (x[:, 1] > c) & (x[:, 1] < d))
    g1, g2 = np.linspace(a, b, 121), np.linspace(c, d, 121)
    G1, G2 = np.meshgrid(g1, g2)
    f = np.exp(joint_log_density(spec, 1, np.stack([G1, G2], -1)))
    th = integrate.simpson(integrate.simpson(f, x=g1, axis=1), x=g2)
    z = (emp - th) / np.sqrt(th * (1 - th) / x.shape[0])
    assert abs(z) < 4


@pytest.mark.parametrize("c", [0.3, 0.7, 1.0 - 1e-8, 1.0])
def test_hw_margin_against_quadrature(c):
    for y in (0.0, 0.4, 1.1, 3.0, 8.0):
        tail, _ = integrate.quad(lambda s: np.exp(hw_margin_logpdf(s, c)), y, np.inf, epsabs=1e-13)
        assert np.exp(hw_margin_logsf(y, c)) == pytest.approx(tail, rel=1e-7, abs=1e-12)


@given(st.floats(0, 30), st.floats(0.05, 1.0))
def test_hw_margin_quantile_inverts(y, c):
    assert hw_margin_quantile(hw_margin_logsf(y, c), c) == pytest.approx(y, abs=1e-8)


def test_oracle_independence():
    spec = CopulaSpec("gaussian_linear", 10, {"rho": 0.0})
    assert gauge_oracle(spec, 1, np.pi / 4, NormKind.L2)[0] == pytest.approx(np.sqrt(2), abs=1e-9)
    assert gauge_oracle(spec, 1, np.pi / 4, NormKind.LINF)[0] == pytest.approx(2.0, abs=1e-9)


def test_oracle_gaussian_against_ray_regression():
    # independent route: bivariate normal density through scipy, regression over u in [10, 60]
    rho = 0.5
    spec = CopulaSpec("gaussian_linear", 10, {"rho": rho})
    v = np.array([np.sqrt(0.5), np.sqrt(0.5)])
    u = np.linspace(10, 60, 26)
    x = u[:, None] * v
    z = stats.norm.isf(0.5 * np.exp(-x))
    mvn = stats.multivariate_normal(cov=[[1, rho], [rho, 1]])
    logf = mvn.logpdf(z) - stats.norm.logpdf(z).sum(axis=1) + (np.log(0.5) - x).sum(axis=1)
    coef = np.polyfit(1 / u, -logf / u, 2)
    assert gauge_oracle(spec, 1, np.pi / 4)[0] == pytest.approx(coef[-1], rel=0.01)


@pytest.mark.parametrize("family", FAMILIES)
def test_oracle_ladder_stability(family):
    spec = CopulaSpec(family, 1000)
    phi = np.linspace(0.1, 6.2, 9)
    a = gauge_oracle(spec, 500, phi, ladder=(20, 30, 40))
    b = gauge_oracle(spec, 500, phi, ladder=(30, 45, 60))
    assert np.max(np.abs(a / b - 1)) <= 0.01


def test_hw_transition_on_oracle_boundary():
    T = 5000
    spec = CopulaSpec("huser_wadsworth", T)
    t_of = lambda d: 1 + (d - 0.7) / 1.8 * (T - 1)  # noqa: E731
    grid = default_phi_grid(360)
    eta = {d: eta_from_boundary(boundary_curve(lambda p, t: gauge_oracle(spec, t, p), t_of(d), grid)) for d in (0.8, 2.0)}
    assert eta[0.8] < 0.9
    assert eta[2.0] > 0.95


def test_inverted_logistic_shape():
    spec = CopulaSpec("inverted_logistic", 100)
    r = lambda phi: float(1 / gauge_oracle(spec, 1, phi)[0])  # noqa: E731
    # bulges along the main diagonal, pinched along the anti-diagonal
    assert r(np.pi / 4) > r(0.0)
    assert r(3 * np.pi / 4) < r(0.0)
    # diagonal radius against the closed-form limit set 2^(-alpha) sqrt 2
    assert r(np.pi / 4) == pytest.approx(2 ** (-0.3) * np.sqrt(2), rel=0.01)
