"""CSV input/output and model-file persistence.

Every CSV written here starts with a ``# config_hash=...`` provenance line
followed by a header row. Floats are written with 17 significant digits so
files are reproducible byte for byte and re-read exactly.

Model files are JSON. Python floats serialise through ``repr``, which
round-trips exactly, so a saved model predicts identically after loading.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .gauge import GaugeGamFit
from .geometry import NormKind
from .margins import GarchFit, GpdParams, MarginalModel, MarginalPipeline
from .quantile import QuantileGamFit
from .series import BivariateSeries
from .splines import KnotGrid
from .tail import KernelAngularDensity, TailModel

__all__ = [
    "SCHEMA_VERSION",
    "write_csv",
    "read_csv",
    "read_series",
    "read_prices",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "build_id",
]

SCHEMA_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, provenance: str, comments=()) -> None:
    """Write ``rows`` under ``header`` with a leading provenance comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={provenance}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file {path} not found")
    with path.open(newline="") as fh:
        lines = [ln for ln in fh if not ln.lstrip().startswith("#") and ln.strip()]
    rows = list(csv.reader(lines))
    if not rows:
        raise DataError(f"{path} has no header row")
    return [h.strip() for h in rows[0]], rows[1:]


def read_series(path) -> BivariateSeries:
    """Read a ``t, x1, x2`` CSV as a Laplace-scale series."""
    header, rows = read_csv(path)
    try:
        idx = [header.index(c) for c in ("t", "x1", "x2")]
    except ValueError:
        raise DataError(f"{path}: expected columns t, x1, x2; found {header}") from None
    try:
        arr = np.array([[float(r[i]) for i in idx] for r in rows])
    except (ValueError, IndexError) as err:
        raise DataError(f"{path}: malformed row ({err})") from None
    if arr.size == 0:
        raise DataError(f"{path}: no data rows")
    return BivariateSeries(arr[:, 0], arr[:, 1:], "laplace")


def read_prices(path) -> tuple[list[str], np.ndarray]:
    """Read a ``date, price`` CSV."""
    header, rows = read_csv(path)
    try:
        di, pi = header.index("date"), header.index("price")
    except ValueError:
        raise DataError(f"{path}: expected columns date, price; found {header}") from None
    try:
        dates = [r[di] for r in rows]
        prices = np.array([float(r[pi]) for r in rows])
    except (ValueError, IndexError) as err:
        raise DataError(f"{path}: malformed row ({err})") from None
    return dates, prices


def build_id() -> str:
    """Short digest of the package sources; identifies the code that wrote a file."""
    h = hashlib.sha1()
    for f in sorted(Path(__file__).parent.glob("*.py")):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()[:12]


# model files ----------------------------------------------------------------


def _arr(a):
    return [float(v) for v in np.asarray(a, float).ravel()]


def _surface_dict(fit):
    return {
        "beta0": float(fit.beta0),
        "coefs": _arr(fit.coefs),
        "knots_t": _arr(fit.knots_t.values),
        "knots_phi": _arr(fit.knots_phi.values),
        "lambda_t": float(fit.lambda_t),
        "lambda_phi": float(fit.lambda_phi),
        "norm": NormKind.parse(fit.norm).value,
        "tau": float(fit.tau),
    }


def _surface_kwargs(d):
    return dict(
        beta0=d["beta0"],
        coefs=np.array(d["coefs"], float),
        knots_t=KnotGrid("time", np.array(d["knots_t"], float)),
        knots_phi=KnotGrid("angle", np.array(d["knots_phi"], float)),
        lambda_t=d["lambda_t"],
        lambda_phi=d["lambda_phi"],
        norm=NormKind(d["norm"]),
    )


def _pipeline_dict(p: MarginalPipeline):
    g, m = p.garch, p.margin
    return {
        "garch": {
            "mu": g.mu,
            "c": g.c,
            "a": g.a,
            "b": g.b,
            "sigma2_init": g.sigma2_init,
            "sigma2_path": _arr(g.sigma2_path),
            "converged": bool(g.converged),
        },
        "margin": {
            "alpha_tail": m.alpha_tail,
            "l": m.l,
            "h": m.h,
            "gpd_upper": [m.gpd_upper.sigma, m.gpd_upper.xi],
            "gpd_lower": [m.gpd_lower.sigma, m.gpd_lower.xi],
            "body": _arr(m.body),
        },
    }


def _pipeline_from(d) -> MarginalPipeline:
    g, m = d["garch"], d["margin"]
    garch = GarchFit(g["mu"], g["c"], g["a"], g["b"], np.array(g["sigma2_path"]), g["sigma2_init"], g["converged"])
    margin = MarginalModel(
        m["alpha_tail"], m["l"], m["h"], GpdParams(*m["gpd_upper"]), GpdParams(*m["gpd_lower"]), np.array(m["body"])
    )
    return MarginalPipeline(garch, margin)


def model_to_dict(model: TailModel, provenance: dict | None = None) -> dict:
    q, g, a = model.quantile_fit, model.gauge_fit, model.angular
    if not isinstance(a, KernelAngularDensity):
        raise TypeError("only kernel angular densities can be saved")
    out = {
        "schema_version": SCHEMA_VERSION,
        "provenance": dict(provenance or {}),
        "norm": NormKind.parse(model.norm).value,
        "quantile": _surface_dict(q),
        "gauge": {**_surface_dict(g), "shape": float(g.shape)},
        "angular": {"angles": _arr(a.angles), "times": _arr(a.times), "h1": a.h1, "h2": a.h2},
        "margins": None if model.margins is None else [_pipeline_dict(p) for p in model.margins],
    }
    out["provenance"].setdefault("build_id", build_id())
    return out


def model_from_dict(d: dict) -> TailModel:
    ver = d.get("schema_version")
    if ver != SCHEMA_VERSION:
        raise DataError(f"unsupported model schema version {ver!r}; expected {SCHEMA_VERSION}")
    try:
        q = QuantileGamFit(**_surface_kwargs(d["quantile"]), tau=d["quantile"]["tau"])
        g = GaugeGamFit(**_surface_kwargs(d["gauge"]), shape=d["gauge"]["shape"], tau=d["gauge"]["tau"])
        a = d["angular"]
        ang = KernelAngularDensity(np.array(a["angles"]), np.array(a["times"]), a["h1"], a["h2"])
        margins = None if d.get("margins") is None else tuple(_pipeline_from(p) for p in d["margins"])
    except (KeyError, TypeError) as err:
        raise DataError(f"malformed model file: {err}") from None
    return TailModel(q, g, ang, NormKind(d["norm"]), margins)


def save_model(path, model: TailModel, provenance: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model, provenance), indent=1, sort_keys=True) + "\n")


def load_model(path) -> tuple[TailModel, dict]:
    """Load a model file; returns the model and its provenance record."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file {path} not found")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise DataError(f"{path} is not a model file: {err}") from None
    return model_from_dict(d), d.get("provenance", {})


def save_margins(path, pipelines, provenance: dict | None = None) -> None:
    d = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {**(provenance or {}), "build_id": build_id()},
        "margins": [_pipeline_dict(p) for p in pipelines],
    }
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")


def load_margins(path) -> tuple:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"margins file {path} not found")
    d = json.loads(path.read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise DataError("unsupported margins schema version")
    return tuple(_pipeline_from(p) for p in d["margins"])
