"""Time-indexed bivariate observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .geometry import NormKind, PolarPoint, to_polar

SCALES = ("raw", "filtered", "laplace")


@dataclass
class BivariateSeries:
    """Pairs ``x[i]`` observed at (1-based) time index ``t[i]`` on a declared marginal scale."""

    t: np.ndarray
    x: np.ndarray
    scale: str = "laplace"

    def __post_init__(self):
        self.t = np.asarray(self.t, float)
        self.x = np.asarray(self.x, float).reshape(-1, 2)
        if self.t.shape != (self.x.shape[0],):
            raise DataError("t and x must have the same number of rows")
        if self.scale not in SCALES:
            raise DataError(f"unknown marginal scale {self.scale!r}")
        if not (np.all(np.isfinite(self.t)) and np.all(np.isfinite(self.x))):
            raise DataError("series contains non-finite values")

    def __len__(self):
        return self.t.size

    @property
    def T(self) -> int:
        return int(np.max(self.t))

    def polar(self, norm=NormKind.L2) -> PolarPoint:
        """Polar form; rows at the origin are dropped."""
        keep = np.any(self.x != 0, axis=1)
        return to_polar(self.x[keep], norm, self.t[keep])
