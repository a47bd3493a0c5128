"""Run configuration: a flat ``key = value`` file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import NormKind

__all__ = ["RunConfig", "load_config", "parse_pairs", "STREAMS"]

# named random streams, one per stage
STREAMS = {"simulate": 0, "fit-cv": 1, "tail-sim": 2, "risk": 3, "simstudy": 4, "diagnose": 5}


def _pair(text):
    if text is None or text == "" or str(text).lower() == "none":
        return None
    if isinstance(text, (tuple, list)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).replace(";", ",").split(",")]
    if len(vals) != 2 or any(v < 0 for v in vals):
        raise ConfigError(f"expected two non-negative smoothing weights, got {text!r}")
    return tuple(vals)


@dataclass
class RunConfig:
    norm: str = "l2"
    tau: float = 0.8
    kappa_t: int = 10
    kappa_phi: int = 17
    lambda_lo: float = 1e-4
    lambda_hi: float = 1e4
    lambda_n: int = 5
    phi_grid: int = 720
    seed: int = 1
    family: str = "gaussian_linear"
    T: int = 5000
    fixed_lambda_quantile: tuple | None = None
    fixed_lambda_gauge: tuple | None = None
    shape: float = 2.0
    h1: float = 0.25
    h2: float | None = None
    alpha_tail: float = 0.03
    threads: int = 1
    cv_rule: str = "one-se"
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            NormKind.parse(self.norm)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.kappa_t < 3:
            raise ConfigError("kappa_t must be at least 3")
        if self.kappa_phi < 4:
            raise ConfigError("kappa_phi must be at least 4")
        if not (0 < self.lambda_lo <= self.lambda_hi) or self.lambda_n < 1:
            raise ConfigError("invalid smoothing grid bounds")
        if self.phi_grid < 8:
            raise ConfigError("phi_grid must have at least 8 angles")
        if self.T < 2:
            raise ConfigError("T must be at least 2")
        if not self.h1 > 0 or (self.h2 is not None and not self.h2 > 0):
            raise ConfigError("bandwidths must be positive")
        # a different fixed shape is allowed; estimating it is not
        if not self.shape > 0:
            raise ConfigError("shape must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.cv_rule not in ("one-se", "min"):
            raise ConfigError("cv_rule must be 'one-se' or 'min'")

    def update(self, values: dict) -> "RunConfig":
        """New config with ``values`` (strings or typed) applied."""
        known = {f.name: f for f in dataclasses.fields(self) if f.name != "extra"}
        data = {k: getattr(self, k) for k in known}
        extra = dict(self.extra)
        for key, raw in values.items():
            key = key.replace("-", "_")
            if raw is None:
                continue
            if key not in known:
                extra[key] = raw
                continue
            data[key] = _coerce(key, raw)
        return RunConfig(**data, extra=extra)

    def canonical(self) -> str:
        """Stable text form used for hashing."""
        items = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        return "\n".join(f"{k}={items[k]!r}" for k in sorted(items))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_INT_KEYS = {"kappa_t", "kappa_phi", "lambda_n", "phi_grid", "seed", "T", "threads"}
_FLOAT_KEYS = {"tau", "lambda_lo", "lambda_hi", "shape", "h1", "alpha_tail"}


def _coerce(key, raw):
    try:
        if key in _INT_KEYS:
            return int(float(raw)) if not isinstance(raw, int) else raw
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "h2":
            return None if raw in (None, "", "none", "None") else float(raw)
        if key in ("fixed_lambda_quantile", "fixed_lambda_gauge"):
            return _pair(raw)
        if key == "norm":
            return NormKind.parse(raw).value
        return str(raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value for {key}: {raw!r} ({err})") from None


def parse_pairs(lines) -> dict:
    out = {}
    for n, line in enumerate(lines, 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"config line {n}: expected key = value")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        cfg = cfg.update(parse_pairs(p.read_text().splitlines()))
    if overrides:
        cfg = cfg.update(overrides)
    return cfg
