import json

import numpy as np
import pytest

from nsgeo import io
from nsgeo.config import RunConfig, load_config, parse_pairs
from nsgeo.errors import ConfigError, DataError
from nsgeo.margins import fit_pipeline
from nsgeo.model import FitOptions, fit_model
from nsgeo.copulas import CopulaSpec, sample_path
from nsgeo.numerics import RngStream
from nsgeo.tail import TailModel


def test_defaults_and_hash_stable():
    a, b = RunConfig(), RunConfig()
    assert a.hash() == b.hash() and len(a.hash()) == 16
    assert a.update({"tau": "0.9"}).hash() != a.hash()
    assert a.update({"tau": "0.9"}).tau == 0.9


@pytest.mark.parametrize(
    "key,value",
    [("tau", 1.2), ("kappa_t", 2), ("kappa_phi", 3), ("lambda_lo", -1), ("h1", 0), ("shape", -2), ("norm", "l3"), ("T", 1), ("cv_rule", "best")],
)
def test_invalid_values_rejected(key, value):
    with pytest.raises(ConfigError):
        RunConfig().update({key: value})


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\ntau = 0.85\nkappa_t = 12  # trailing\nfixed_lambda_gauge = 1,10\nunknown_key = x\n")
    cfg = load_config(f, {"seed": "9"})
    assert (cfg.tau, cfg.kappa_t, cfg.seed) == (0.85, 12, 9)
    assert cfg.fixed_lambda_gauge == (1.0, 10.0)
    assert cfg.extra == {"unknown_key": "x"}
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        parse_pairs(["no equals sign"])
    with pytest.raises(ConfigError):
        RunConfig().update({"fixed_lambda_quantile": "1,2,3"})


def test_csv_provenance_and_exact_floats(tmp_path):
    vals = np.random.default_rng(0).normal(size=(5, 2))
    p = tmp_path / "out.csv"
    io.write_csv(p, ["a", "b"], vals.tolist(), "abc123", comments=["note"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# config_hash=abc123"
    assert lines[1] == "# note" and lines[2] == "a,b"
    header, rows = io.read_csv(p)
    assert header == ["a", "b"]
    assert np.array_equal(np.array(rows, float), vals)


def test_read_series_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,y\n1,2\n")
    with pytest.raises(DataError):
        io.read_series(p)
    p.write_text("t,x1,x2\n1,2,oops\n")
    with pytest.raises(DataError):
        io.read_series(p)
    with pytest.raises(DataError):
        io.read_series(tmp_path / "nope.csv")


@pytest.fixture(scope="module")
def small_model():
    series = sample_path(CopulaSpec("gaussian_linear", 3000), RngStream(2))
    opts = FitOptions(fixed_lambda_quantile=(1.0, 1.0), fixed_lambda_gauge=(1.0, 1.0))
    with pytest.warns(RuntimeWarning):
        return fit_model(series, opts)


def test_model_round_trip_exact(tmp_path, small_model):
    p = tmp_path / "m.json"
    io.save_model(p, small_model, {"seed": 2})
    loaded, prov = io.load_model(p)
    assert prov["seed"] == 2 and "build_id" in prov
    P, TT = np.meshgrid(np.linspace(0, 2 * np.pi, 40), np.linspace(1, 3000, 7))
    assert np.array_equal(loaded.rate(P, TT), small_model.rate(P, TT))
    assert np.array_equal(loaded.threshold(P, TT), small_model.threshold(P, TT))
    assert np.array_equal(loaded.angular.grid_values(1500.0), small_model.angular.grid_values(1500.0))
    assert loaded.tau == small_model.tau and loaded.shape == small_model.shape
    # saving the loaded model reproduces the file
    q = tmp_path / "m2.json"
    io.save_model(q, loaded, prov)
    assert q.read_bytes() == p.read_bytes()


def test_model_file_errors(tmp_path, small_model):
    p = tmp_path / "m.json"
    io.save_model(p, small_model)
    d = json.loads(p.read_text())
    d["schema_version"] = 99
    p.write_text(json.dumps(d))
    with pytest.raises(DataError):
        io.load_model(p)
    p.write_text("not json")
    with pytest.raises(DataError):
        io.load_model(p)
    del d["gauge"]
    d["schema_version"] = io.SCHEMA_VERSION
    with pytest.raises(DataError):
        io.model_from_dict(d)


def test_margins_round_trip(tmp_path, small_model):
    g = np.random.default_rng(5)
    prices = 100 * np.exp(np.cumsum(0.01 * g.standard_t(5, size=1500)))
    pipe = fit_pipeline(prices)
    p = tmp_path / "margins.json"
    io.save_margins(p, [pipe, pipe])
    (a, _) = io.load_margins(p)
    z = np.linspace(-6, 6, 25)
    assert np.array_equal(a.from_laplace(z, 1.3), pipe.from_laplace(z, 1.3))
    m = TailModel(small_model.quantile_fit, small_model.gauge_fit, small_model.angular, small_model.norm, (a, a))
    q = tmp_path / "mm.json"
    io.save_model(q, m)
    assert io.load_model(q)[0].margins[1].garch.b == pipe.garch.b
