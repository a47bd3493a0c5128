"""Cubic and cyclic cubic regression splines, tensor products and penalties.

Both marginal bases are parametrised by the function values at the knots, so
coefficients are directly interpretable and the curvature penalty
``integral f''(x)^2 dx`` has the closed form ``D' B^{-1} D`` with banded
(natural) or circulant (cyclic) ``B`` and ``D``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KnotGrid",
    "BasisEval",
    "knots_time",
    "knots_angle",
    "cubic_basis",
    "cyclic_cubic_basis",
    "tensor_basis",
    "row_kron",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KnotGrid:
    kind: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 1 or v.size < 2 or np.any(np.diff(v) <= 0):
            raise ValueError("knots must be strictly ascending")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass
class BasisEval:
    matrix: np.ndarray
    penalty: np.ndarray

    @property
    def n_basis(self) -> int:
        return self.matrix.shape[1]


def knots_time(T: int, kappa_t: int) -> KnotGrid:
    """Equally spaced time knots ``1 + (T-1)(j-1)/(kappa_t-1)``, j = 1..kappa_t."""
    if kappa_t < 3:
        raise ValueError("kappa_t must be at least 3")
    if T < 2:
        raise ValueError("T must be at least 2")
    j = np.arange(1, kappa_t + 1)
    return KnotGrid("time", 1.0 + (T - 1.0) * (j - 1.0) / (kappa_t - 1.0))


def knots_angle(kappa_phi: int) -> KnotGrid:
    """Equally spaced angle knots ``2 pi (j-1)/(kappa_phi-1)`` from 0 to 2 pi."""
    if kappa_phi < 4:
        raise ValueError("kappa_phi must be at least 4")
    j = np.arange(1, kappa_phi + 1)
    return KnotGrid("angle", TWO_PI * (j - 1.0) / (kappa_phi - 1.0))


def _natural_matrices(x):
    h = np.diff(x)
    k = x.size
    D = np.zeros((k - 2, k))
    B = np.zeros((k - 2, k - 2))
    for i in range(k - 2):
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            B[i, i + 1] = B[i + 1, i] = h[i + 1] / 6.0
    return D, B


def _cyclic_matrices(x):
    # x includes both endpoints of the period; m = len(x) - 1 free values
    h = np.diff(x)
    m = h.size
    D = np.zeros((m, m))
    B = np.zeros((m, m))
    for j in range(m):
        hp = h[j - 1]  # interval ending at knot j (wraps)
        hn = h[j]
        D[j, (j - 1) % m] += 1.0 / hp
        D[j, j] += -1.0 / hp - 1.0 / hn
        D[j, (j + 1) % m] += 1.0 / hn
        B[j, (j - 1) % m] += hp / 6.0
        B[j, j] += (hp + hn) / 3.0
        B[j, (j + 1) % m] += hn / 6.0
    return D, B


def _piece_weights(x, knots):
    """Interval index and the four cubic-spline interpolation weights."""
    h = np.diff(knots)
    j = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, knots.size - 2)
    hj = h[j]
    am = (knots[j + 1] - x) / hj
    ap = (x - knots[j]) / hj
    cm = ((knots[j + 1] - x) ** 3 / hj - hj * (knots[j + 1] - x)) / 6.0
    cp = ((x - knots[j]) ** 3 / hj - hj * (x - knots[j])) / 6.0
    return j, am, ap, cm, cp


def _scaled(knots: KnotGrid):
    v = knots.values
    if knots.kind == "time":
        lo, hi = v[0], v[-1]
        return (v - lo) / (hi - lo), lo, hi
    return v, 0.0, 1.0


def cubic_basis(x, knots: KnotGrid) -> BasisEval:
    """Natural cubic regression spline basis (one function per knot).

    Time knots are mapped to [0, 1] before building the basis, so the
    penalty is the curvature integral on that unit scale.
    """
    x = np.asarray(x, float)
    v = knots.values
    tol = 1e-9 * (v[-1] - v[0])
    if np.any(x < v[0] - tol) or np.any(x > v[-1] + tol):
        raise ValueError("x outside the knot range; the basis does not extrapolate")
    if knots.kind == "time":
        kx, lo, hi = _scaled(knots)
        xs = (x - lo) / (hi - lo)
    else:
        kx, xs = v, x
    xs = np.clip(xs, kx[0], kx[-1])
    k = kx.size
    D, B = _natural_matrices(kx)
    F = np.zeros((k, k))
    F[1:-1] = np.linalg.solve(B, D)
    j, am, ap, cm, cp = _piece_weights(xs, kx)
    X = cm[:, None] * F[j] + cp[:, None] * F[j + 1]
    rows = np.arange(xs.size)
    X[rows, j] += am
    X[rows, j + 1] += ap
    S = D.T @ np.linalg.solve(B, D)
    return BasisEval(X, 0.5 * (S + S.T))


def cyclic_cubic_basis(phi, knots: KnotGrid) -> BasisEval:
    """Periodic cubic spline basis on [0, 2 pi) with ``len(knots) - 1`` functions."""
    phi = np.asarray(phi, float)
    kx = knots.values
    period = kx[-1] - kx[0]
    if np.any(phi < kx[0] - 1e-12) or np.any(phi > kx[-1] + 1e-12):
        raise ValueError("angle outside [0, 2 pi]")
    xs = kx[0] + np.mod(phi - kx[0], period)
    m = kx.size - 1
    D, B = _cyclic_matrices(kx)
    F = np.linalg.solve(B, D)
    j, am, ap, cm, cp = _piece_weights(xs, kx)
    jn = (j + 1) % m
    X = cm[:, None] * F[j] + cp[:, None] * F[jn]
    rows = np.arange(xs.size)
    X[rows, j] += am
    X[rows, jn] += ap
    S = D.T @ np.linalg.solve(B, D)
    return BasisEval(X, 0.5 * (S + S.T))


def row_kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product: row i is ``kron(a[i], b[i])``."""
    if a.shape[0] != b.shape[0]:
        raise ValueError("bases must have the same number of rows")
    return (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1)


def tensor_basis(bt: BasisEval, bphi: BasisEval) -> tuple[BasisEval, BasisEval]:
    """Tensor-product basis with its two marginal penalties.

    Returns two :class:`BasisEval` sharing the same design matrix; their
    penalties are ``S_t kron I`` and ``I kron S_phi``.
    """
    X = row_kron(bt.matrix, bphi.matrix)
    a, b = bt.n_basis, bphi.n_basis
    St = np.kron(bt.penalty, np.eye(b))
    Sp = np.kron(np.eye(a), bphi.penalty)
    return BasisEval(X, St), BasisEval(X, Sp)
