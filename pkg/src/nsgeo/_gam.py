"""Penalised tensor-product smooths in (time, angle) with a log link.

Shared by the quantile and gauge stages: design construction with a
sum-to-zero identifiability constraint, a Newton fit of a penalised
separable loss, and blocked cross-validation over a smoothing grid.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .geometry import NormKind
from .splines import KnotGrid, cubic_basis, cyclic_cubic_basis, knots_angle, knots_time, row_kron

logger = logging.getLogger(__name__)

N_FOLDS = 5
CV_RULES = ("one-se", "min")


def default_lambda_grid(lo: float = 1e-4, hi: float = 1e4, n: int = 5) -> list[tuple[float, float]]:
    vals = np.logspace(np.log10(lo), np.log10(hi), n)
    return [(float(a), float(b)) for a, b in itertools.product(vals, vals)]


@dataclass
class TensorSurface:
    """``exp(beta0 + s(t, phi))`` for a fitted tensor smooth."""

    beta0: float
    coefs: np.ndarray
    knots_t: KnotGrid
    knots_phi: KnotGrid
    lambda_t: float
    lambda_phi: float
    norm: NormKind = NormKind.L2

    def design(self, phi, t) -> np.ndarray:
        return tensor_design(self.knots_t, self.knots_phi, t, phi)

    def log_predict(self, phi, t):
        phi, t = np.broadcast_arrays(np.asarray(phi, float), np.asarray(t, float))
        shape = phi.shape
        phi, t = phi.ravel(), t.ravel()
        if np.any(~np.isfinite(t)) or np.any(t < self.knots_t.values[0] - 1e-9) or np.any(
            t > self.knots_t.values[-1] + 1e-9
        ):
            raise ValueError(
                f"time outside the fitted range [{self.knots_t.values[0]}, {self.knots_t.values[-1]}]"
            )
        if np.any(phi < 0) or np.any(phi > 2 * np.pi):
            raise ValueError("angles must lie in [0, 2 pi)")
        out = self.beta0 + self.design(phi, t) @ self.coefs
        return out.reshape(shape) if shape else float(out[0])

    def predict(self, phi, t):
        return np.exp(self.log_predict(phi, t))


def tensor_design(knots_t: KnotGrid, knots_phi: KnotGrid, t, phi) -> np.ndarray:
    t = np.asarray(t, float)
    phi = np.asarray(phi, float)
    return row_kron(cubic_basis(t, knots_t).matrix, cyclic_cubic_basis(phi, knots_phi).matrix)


def tensor_penalties(knots_t: KnotGrid, knots_phi: KnotGrid) -> tuple[np.ndarray, np.ndarray]:
    st = cubic_basis(knots_t.values[:1], knots_t).penalty
    sp = cyclic_cubic_basis(np.zeros(1), knots_phi).penalty
    a, b = st.shape[0], sp.shape[0]
    return np.kron(st, np.eye(b)), np.kron(np.eye(a), sp)


def constraint_basis(X: np.ndarray) -> np.ndarray:
    """Null-space basis ``Z`` of the constraint ``1' X beta = 0``.

    Centres the smooth over the training points so that it is not confounded
    with the intercept.
    """
    c = X.sum(axis=0)[:, None]
    q, _ = np.linalg.qr(c, mode="complete")
    return q[:, 1:]


@dataclass
class PenalizedProblem:
    """Design ``[1, X Z]`` plus the two constrained penalties."""

    X: np.ndarray
    Z: np.ndarray
    St: np.ndarray
    Sp: np.ndarray
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xz = self.X @ self.Z
        self.A = np.column_stack([np.ones(self.X.shape[0]), xz])
        self.St_c = self.Z.T @ self.St @ self.Z
        self.Sp_c = self.Z.T @ self.Sp @ self.Z

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def subset(self, rows) -> "PenalizedProblem":
        return PenalizedProblem(self.X[rows], self.Z, self.St, self.Sp)

    def penalty(self, lam_t, lam_p) -> np.ndarray:
        p = self.dim
        S = np.zeros((p, p))
        S[1:, 1:] = lam_t * self.St_c + lam_p * self.Sp_c
        return S

    def full_coefs(self, theta) -> tuple[float, np.ndarray]:
        return float(theta[0]), self.Z @ theta[1:]


def fit_penalized(problem: PenalizedProblem, loss, lam_t, lam_p, theta0, tol=None, max_iter=200):
    """Newton minimisation of ``sum loss(eta) + theta' S_lambda theta``.

    ``loss(eta)`` returns ``(value, d/deta, d2/deta2)`` elementwise sums/arrays.
    """
    A = problem.A
    S = problem.penalty(lam_t, lam_p)
    n = A.shape[0]
    if tol is None:
        tol = 1e-7 * max(n, 1)

    def objective(theta):
        eta = A @ theta
        val, d1, _ = loss(eta)
        return val + theta @ S @ theta, A.T @ d1 + 2.0 * S @ theta

    def hessian(theta):
        eta = A @ theta
        _, _, d2 = loss(eta)
        return (A * d2[:, None]).T @ A + 2.0 * S

    return numerics.minimize(objective, theta0, tol=tol, max_iter=max_iter, hess=hessian)


def blocked_folds(t, k: int = N_FOLDS) -> list[np.ndarray]:
    """Indices of ``k`` contiguous time blocks."""
    order = np.argsort(t, kind="stable")
    return [np.sort(b) for b in np.array_split(order, k)]


def cross_validate(problem, fit_fn, score_fn, t, lambda_grid, n_jobs: int = 1, rule: str = "one-se"):
    """Blocked k-fold CV over ``lambda_grid``; returns (chosen lambdas, score table).

    ``fit_fn(train_rows, sub_problem, lam_t, lam_p, theta0)`` returns a
    :class:`~nsgeo.numerics.MinimizeResult`; ``score_fn(test_rows, eta)`` the
    held-out loss of each test row. Grid points whose fit fails in any fold
    are skipped.

    With ``rule="one-se"`` (default) the choice follows the one-standard-error
    rule on paired held-out losses: among candidates whose total loss is
    within one standard error of the best, the most heavily smoothed one
    (largest ``lam_t * lam_p``) is taken. ``rule="min"`` takes the best.
    """
    if rule not in CV_RULES:
        raise ValueError(f"unknown CV rule {rule!r}; choose from {', '.join(CV_RULES)}")
    folds = blocked_folds(t)
    n = problem.A.shape[0]
    losses = np.full((len(lambda_grid), n), np.nan)

    def run_fold(fi):
        test = folds[fi]
        train = np.setdiff1d(np.arange(n), test)
        sub = PenalizedProblem(problem.X[train], constraint_basis(problem.X[train]), problem.St, problem.Sp)
        test_A = np.column_stack([np.ones(test.size), problem.X[test] @ sub.Z])
        theta = None
        for g, lam in enumerate(lambda_grid):
            res = fit_fn(train, sub, lam[0], lam[1], theta)
            if not res.success and not np.all(np.isfinite(res.x)):
                continue
            if not res.success:
                logger.debug("CV fit at lambda=%s fold %d did not fully converge: %s", lam, fi, res.message)
            theta = res.x
            losses[g, test] = score_fn(test, test_A @ res.x)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            list(ex.map(run_fold, range(len(folds))))
    else:
        for i in range(len(folds)):
            run_fold(i)
    total = losses.sum(axis=1)
    ok = np.isfinite(total)
    for lam, good in zip(lambda_grid, ok):
        if not good:
            warnings.warn(f"smoothing grid point {lam} skipped: fit failed", RuntimeWarning, stacklevel=2)
    if not np.any(ok):
        raise RuntimeError("every smoothing grid point failed to fit")
    best = int(np.nanargmin(np.where(ok, total, np.nan)))
    if rule == "min":
        return lambda_grid[best], total
    return lambda_grid[one_se_choice(losses, lambda_grid, best)], total


def one_se_choice(losses: np.ndarray, lambda_grid, best: int) -> int:
    """Index of the smoothest grid point within one paired SE of ``best``."""
    n = losses.shape[1]
    chosen = best
    for g, lam in enumerate(lambda_grid):
        if not np.all(np.isfinite(losses[g])):
            continue
        diff = losses[g] - losses[best]
        se = np.sqrt(n) * diff.std()
        smoother = np.log(lam[0]) + np.log(lam[1]) > np.log(lambda_grid[chosen][0]) + np.log(
            lambda_grid[chosen][1]
        )
        if diff.sum() <= se and smoother:
            chosen = g
    return chosen


def build_problem(t, phi, T: int, kappa_t: int, kappa_phi: int):
    kt = knots_time(T, kappa_t)
    kp = knots_angle(kappa_phi)
    X = tensor_design(kt, kp, t, phi)
    St, Sp = tensor_penalties(kt, kp)
    St, Sp = scale_penalty(St, X), scale_penalty(Sp, X)
    return PenalizedProblem(X, constraint_basis(X), St, Sp), kt, kp


def scale_penalty(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Rescale ``S`` so its weakest penalised direction matches one row of ``X'X``.

    With this convention a smoothing weight of ``lambda`` shrinks the
    smoothest penalised component about as much as ``lambda`` observations
    would pin it, whatever the knot spacing or sample size.
    """
    xx = np.linalg.norm(X.T @ X, 1) / X.shape[0]
    ev = np.linalg.eigvalsh(S)
    nz = ev[ev > 1e-8 * ev[-1]]
    return S * (xx / nz[0])
