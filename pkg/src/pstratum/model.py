"""Counterfactual response model and its least-squares fit.

The model says: for a control non-responder with covariate level ``x`` and
control-arm outcome ``y``, the probability of responding under treatment is
``logistic(beta0 + beta1*y + beta2*x)``. Averaging that probability over the
observed control non-responder outcome distribution must reproduce, at every
covariate level, the empirically identified response-gain probability. The
coefficients are estimated by minimizing the summed squared mismatch of this
moment system with quasi-Newton (BFGS) descent from one or many starting
points, followed by a Gauss-Newton polish.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import ModelParams, _frozen
from .empirical import EmpiricalTables
from .errors import UnderIdentifiedWarning

_ORIGIN = ModelParams(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    ``init_points`` defaults to the single origin start. ``grid_multistart``
    optionally adds every integer point of ``[-m, m]^3`` as an extra start;
    the best final objective wins, with ties broken by lexicographically
    smallest coefficients so results are reproducible.
    ``finite_difference_step`` is only used by gradient self-checks, never by
    the optimizer itself.
    """

    init_points: tuple[ModelParams, ...] = (_ORIGIN,)
    grid_multistart: int | None = None
    gradient_tolerance: float = 1e-8
    max_iterations: int = 500
    finite_difference_step: float = 1e-6

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def starts(self) -> np.ndarray:
        points = [p.as_array() for p in self.init_points]
        if self.grid_multistart is not None:
            m = int(self.grid_multistart)
            axis = np.arange(-m, m + 1, dtype=float)
            grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
            points.extend(grid.reshape(-1, 3))
        return np.asarray(points, dtype=float)


@dataclass(frozen=True)
class FitResult:
    beta_hat: ModelParams
    objective_value: float
    converged: bool
    jacobian_rank: int
    per_level_residuals: np.ndarray
    start_objectives: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "per_level_residuals",
                           _frozen(np.asarray(self.per_level_residuals, dtype=float)))
        if self.start_objectives is not None:
            object.__setattr__(self, "start_objectives",
                               _frozen(np.asarray(self.start_objectives, dtype=float)))


def g_m(beta: ModelParams, x: int, y: int) -> float:
    """Model probability that a control non-responder with (x, y) responds under treatment."""
    return float(expit(beta.beta0 + beta.beta1 * y + beta.beta2 * x))


def _tables_arrays(tables: EmpiricalTables) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tables.g_l_vector(), tables.g_r_matrix(), np.arange(tables.k_levels, dtype=float)


def _residuals(b: np.ndarray, g_l, g_r, xs) -> tuple[np.ndarray, np.ndarray]:
    base = b[0] + b[2] * xs
    m = expit(np.column_stack([base, base + b[1]]))   # columns y=0, y=1
    mix = m[:, 0] * g_r[:, 0] + m[:, 1] * g_r[:, 1]
    return g_l - mix, m


def _residual_jacobian(b: np.ndarray, g_l, g_r, xs) -> tuple[np.ndarray, np.ndarray]:
    r, m = _residuals(b, g_l, g_r, xs)
    w = m * (1.0 - m) * g_r                           # logistic slope times mixture weight
    col0 = -(w[:, 0] + w[:, 1])
    jac = np.column_stack([col0, -w[:, 1], xs * col0])
    return r, jac


def _value_and_grad(b: np.ndarray, g_l, g_r, xs) -> tuple[float, np.ndarray]:
    r, jac = _residual_jacobian(b, g_l, g_r, xs)
    return float(r @ r), 2.0 * (r @ jac)


def objective(beta: ModelParams, tables: EmpiricalTables) -> float:
    """Summed squared mismatch of the per-level moment equations at ``beta``."""
    g_l, g_r, xs = _tables_arrays(tables)
    r, _ = _residuals(beta.as_array(), g_l, g_r, xs)
    return float(r @ r)


def residuals(beta: ModelParams, tables: EmpiricalTables) -> np.ndarray:
    """Per-level signed residuals of the moment system at ``beta``."""
    g_l, g_r, xs = _tables_arrays(tables)
    r, _ = _residuals(beta.as_array(), g_l, g_r, xs)
    return r


def analytic_gradient(beta: ModelParams, tables: EmpiricalTables) -> np.ndarray:
    """Exact gradient of :func:`objective` with respect to the three coefficients."""
    g_l, g_r, xs = _tables_arrays(tables)
    _, grad = _value_and_grad(beta.as_array(), g_l, g_r, xs)
    return grad


def jacobian_rank(beta: ModelParams, tables: EmpiricalTables, rtol: float = 1e-8) -> int:
    """Numerical rank of the residual Jacobian at ``beta``.

    Rank below 3 signals that the moment system cannot pin down all three
    coefficients at this point (for example when no control non-responder
    has a successful outcome, the outcome coefficient never enters).
    """
    g_l, g_r, xs = _tables_arrays(tables)
    _, jac = _residual_jacobian(beta.as_array(), g_l, g_r, xs)
    s = np.linalg.svd(jac, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


#: Largest coefficient-space displacement allowed per BFGS iteration. The
#: objective flattens exponentially once every linear predictor saturates, so
#: an uncapped line search can overshoot into a region where the gradient
#: underflows and no optimizer can recover.
_MAX_STEP = 4.0

_EYE3 = np.eye(3)


def _bfgs(b0: np.ndarray, g_l, g_r, xs, gtol: float, maxiter: int
          ) -> tuple[np.ndarray, float]:
    """BFGS descent with an expanding/backtracking Armijo search.

    The trial step starts at the quasi-Newton length, backtracks on failure,
    and doubles while that keeps paying off, so nearly-flat starts still make
    real progress per iteration while the displacement cap holds.
    """
    b = np.asarray(b0, dtype=float).copy()
    q, g = _value_and_grad(b, g_l, g_r, xs)
    h_inv = _EYE3.copy()
    scaled = False
    for _ in range(maxiter):
        if np.max(np.abs(g)) <= gtol:
            break
        p = -h_inv @ g
        slope = float(g @ p)
        if not np.isfinite(slope) or slope >= 0.0:
            h_inv = _EYE3.copy()
            scaled = False
            p = -g
            slope = float(g @ p)
        norm = float(np.linalg.norm(p))
        if norm == 0.0 or not np.isfinite(norm):
            break
        t_max = _MAX_STEP / norm

        t = min(1.0, t_max)
        accepted = False
        for _ in range(60):
            b_new = b + t * p
            q_new, g_new = _value_and_grad(b_new, g_l, g_r, xs)
            if q_new <= q + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        while 2.0 * t <= t_max:
            b_try = b + 2.0 * t * p
            q_try, g_try = _value_and_grad(b_try, g_l, g_r, xs)
            if q_try <= q + 2e-4 * t * slope and q_try < q_new:
                t *= 2.0
                b_new, q_new, g_new = b_try, q_try, g_try
            else:
                break

        s = b_new - b
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            if not scaled:
                h_inv = (sy / float(yv @ yv)) * _EYE3
                scaled = True
            rho = 1.0 / sy
            left = _EYE3 - rho * np.outer(s, yv)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)
        b, q, g = b_new, q_new, g_new
    return b, q


def _gauss_newton_polish(b: np.ndarray, q: float, g_l, g_r, xs,
                         max_steps: int = 30) -> tuple[np.ndarray, float]:
    """Refine a least-squares candidate to near machine precision.

    Exactly solvable systems converge quadratically to a zero objective;
    elsewhere the loop stops as soon as a step no longer buys a meaningful
    relative improvement.
    """
    for _ in range(max_steps):
        if q <= 1e-30:
            break
        r, jac = _residual_jacobian(b, g_l, g_r, xs)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        for _ in range(12):
            cand = b + scale * step
            r_cand, _ = _residuals(cand, g_l, g_r, xs)
            q_cand = float(r_cand @ r_cand)
            if q_cand < q:
                break
            scale *= 0.5
        else:
            break
        improved = q - q_cand
        b, q = cand, q_cand
        if improved <= 1e-10 * max(q, 1e-30):
            break
    return b, q


def fit_beta(tables: EmpiricalTables, config: FitConfig | None = None) -> FitResult:
    """Minimize the moment-system objective from every configured start.

    Returns the best candidate across starts. ``converged`` reflects whether
    the gradient max-norm at the winner fell below the configured tolerance;
    when no start converges the best iterate is still returned with
    ``converged=False``. The rank diagnostic is evaluated at the winner.
    """
    config = config or FitConfig()
    g_l, g_r, xs = _tables_arrays(tables)
    if tables.k_levels < 3:
        warnings.warn(
            f"only {tables.k_levels} covariate level(s) for 3 coefficients; "
            "the fit is not uniquely determined",
            UnderIdentifiedWarning,
            stacklevel=2,
        )

    starts = config.starts()
    candidates = []
    for x0 in starts:
        b, q = _bfgs(x0, g_l, g_r, xs, config.gradient_tolerance,
                     config.max_iterations)
        b, q = _gauss_newton_polish(b, q, g_l, g_r, xs)
        _, grad = _value_and_grad(b, g_l, g_r, xs)
        converged = bool(np.max(np.abs(grad)) <= config.gradient_tolerance)
        candidates.append((q, tuple(b), converged))

    q_best, b_best, conv_best = min(candidates, key=lambda c: (c[0], c[1]))
    beta_hat = ModelParams(*b_best)
    r, _ = _residuals(np.array(b_best), g_l, g_r, xs)
    return FitResult(
        beta_hat=beta_hat,
        objective_value=q_best,
        converged=conv_best,
        jacobian_rank=jacobian_rank(beta_hat, tables),
        per_level_residuals=r,
        start_objectives=np.array([c[0] for c in candidates]) if len(candidates) > 1 else None,
    )
