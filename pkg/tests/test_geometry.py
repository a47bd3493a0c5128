import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsgeo.copulas import CopulaSpec, gauge_oracle
from nsgeo.geometry import (
    QUADRANTS,
    NormKind,
    boundary_curve,
    default_phi_grid,
    eta_from_boundary,
    return_level_curve,
    return_level_radius,
    to_polar,
    unit_point,
)
from oracles import ConstantSurface, independence_gauge

NORMS = list(NormKind)


def test_to_polar_examples():
    p = to_polar([3.0, 4.0], "l2")
    assert p.r[0] == pytest.approx(5.0) and p.phi[0] == pytest.approx(0.92730, abs=1e-5)
    p = to_polar([3.0, 4.0], "l1")
    assert p.r[0] == pytest.approx(7.0) and p.phi[0] == pytest.approx(0.92730, abs=1e-5)
    for n in NORMS:
        p = to_polar([-1.0, 0.0], n)
        assert p.r[0] == pytest.approx(1.0) and p.phi[0] == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        to_polar([0.0, 0.0], "l2")


def test_unit_point_examples():
    assert np.allclose(unit_point(np.pi / 4, "linf"), [1, 1])
    assert np.allclose(unit_point(np.pi / 4, "l1"), [0.5, 0.5])
    for n in NORMS:
        assert np.allclose(unit_point(0.0, n), [1, 0])


@pytest.mark.parametrize("kind", NORMS)
def test_polar_round_trip(kind):
    phi = default_phi_grid(720)
    for c in (0.01, 1.0, 37.5):
        p = to_polar(c * unit_point(phi, kind), kind)
        assert np.max(np.abs(p.r - c)) <= 1e-10 * c
        d = np.abs(p.phi - phi)
        assert np.max(np.minimum(d, 2 * np.pi - d)) <= 1e-10


@given(st.floats(0.0, 2 * np.pi, exclude_max=True), st.floats(1e-3, 1e3), st.sampled_from(NORMS))
def test_polar_round_trip_property(phi, c, kind):
    p = to_polar(c * unit_point(phi, kind), kind)
    assert p.r[0] == pytest.approx(c, rel=1e-12)


def test_boundary_unit_circle_and_diamond():
    c = boundary_curve(lambda p, t: np.ones_like(p), 1)
    assert np.allclose(c.radii, 1.0)
    d = boundary_curve(lambda p, t: independence_gauge(p), 1)
    assert np.allclose(np.abs(d.points).sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        boundary_curve(lambda p, t: -np.ones_like(p), 1)


@pytest.mark.parametrize("kind", NORMS)
def test_independence_boundary_extremes_all_norms(kind):
    # independence gauge evaluated on the unit ball of each norm
    def g(p, t):
        v = unit_point(p, kind)
        return np.abs(v).sum(axis=-1)

    c = boundary_curve(g, 1, kind=kind)
    assert np.allclose(c.points.max(axis=0), [1, 1], atol=1e-9)
    assert np.allclose(c.points.min(axis=0), [-1, -1], atol=1e-9)


def test_eta_examples():
    d = boundary_curve(lambda p, t: independence_gauge(p), 1)
    for q in QUADRANTS:
        assert eta_from_boundary(d, q) == pytest.approx(0.5, abs=1e-12)
    sq = boundary_curve(lambda p, t: np.ones_like(p), 1, kind="linf")
    assert eta_from_boundary(sq, (1, 1)) == pytest.approx(1.0)


def test_eta_clamped_with_warning():
    c = boundary_curve(lambda p, t: 0.5 * np.ones_like(p), 1, kind="linf")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert eta_from_boundary(c, (1, 1)) == 1.0
    assert any("clamped" in str(x.message) for x in w)


def test_eta_coarse_grid_error():
    c = boundary_curve(lambda p, t: np.ones_like(p), 1, phi_grid=np.array([0.0, np.pi]))
    with pytest.raises(ValueError, match="finer"):
        eta_from_boundary(c, (1, 1))


def test_eta_gaussian_oracle_against_dense_grid():
    spec = CopulaSpec("gaussian_linear", 10, {"rho": 0.5})
    g = lambda p, t: gauge_oracle(spec, t, p)  # noqa: E731
    coarse = eta_from_boundary(boundary_curve(g, 1), (1, 1))
    dense = eta_from_boundary(boundary_curve(g, 1, np.linspace(0, 2 * np.pi, 10_001)), (1, 1))
    assert coarse == pytest.approx(dense, abs=0.003)
    # known limit (1 + rho) / 2 for the Gaussian copula
    assert dense == pytest.approx(0.75, abs=0.02)


def test_eta_grid_refinement_invariance():
    g = lambda p, t: np.exp(0.3 * np.cos(2 * p)) * independence_gauge(p)  # noqa: E731
    vals = [eta_from_boundary(boundary_curve(g, 1, default_phi_grid(n)), (1, 1)) for n in (2000, 4000, 16000)]
    assert max(vals) - min(vals) <= 0.005


def _fits():
    thr = ConstantSurface(lambda p: 1.5 / independence_gauge(p), tau=0.8, norm=NormKind.L2)
    gauge = ConstantSurface(independence_gauge, shape=2.0)
    return thr, gauge


def test_return_level_at_tau_is_threshold():
    thr, gauge = _fits()
    phi = default_phi_grid()
    c = return_level_curve(thr, gauge, 1, 0.8)
    assert np.allclose(c.radii, np.hypot(*(unit_point(phi, "l2") * thr.predict(phi, 1)[:, None]).T))
    with pytest.raises(ValueError):
        return_level_curve(thr, gauge, 1, 0.7)


def test_return_level_radii_increase_in_p():
    thr, gauge = _fits()
    ps = [0.8, 0.85, 0.9, 0.99, 0.999, 0.9999]
    radii = np.array([return_level_curve(thr, gauge, 1, p).radii for p in ps])
    assert np.all(np.diff(radii, axis=0) > 0)


@given(st.floats(0.8, 0.9999), st.floats(0.8, 0.9999))
def test_return_level_radius_monotone_property(p1, p2):
    lo, hi = sorted((p1, p2))
    r1 = return_level_radius(lo, 0.8, 1.3, 1.7)
    r2 = return_level_radius(hi, 0.8, 1.3, 1.7)
    assert r1 <= r2 + 1e-12
