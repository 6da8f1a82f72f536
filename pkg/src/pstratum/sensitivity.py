"""Fixed outcome-coefficient sensitivity analysis.

Holding the outcome coefficient of the response model fixed, the intercept
and covariate effect collapse into one free parameter per covariate level,
so each level's moment equation can be solved independently by bisection.
Sweeping the fixed coefficient over a grid shows how sensitive the contrast
estimate is to that (weakly identified) parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import (
    ESTIMATION_ERRORS,
    STRATIFIED_BY_ARM,
    BootstrapConfig,
    _replicate_rngs,
    pivotal_ci,
    resample,
)
from .data import Dataset, _frozen
from .empirical import EmpiricalTables
from .errors import NoRootInBracket, TooManyFailedReplicates
from .estimand import ThetaBreakdown, theta_from_tables

_BRACKET = 50.0


@dataclass(frozen=True)
class SensitivityResult:
    """Per-level solved offsets and the resulting contrast for one fixed coefficient."""

    beta1_fixed: float
    beta_x_hat: np.ndarray
    theta_hat: float
    ci: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta_x_hat",
                           _frozen(np.asarray(self.beta_x_hat, dtype=float)))


def _logistic(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def solve_beta_x(g_l: float, g_r0: float, g_r1: float, beta1: float) -> float:
    """Solve one level's moment equation for the per-level offset.

    Finds the root of ``g_r0*logistic(b) + g_r1*logistic(b + beta1) - g_l``
    by bisection on [-50, 50]; the left side is strictly increasing in ``b``
    so the root is unique. Boundary targets return sentinels: ``-inf`` for
    ``g_l == 0`` and ``+inf`` for ``g_l == 1``.
    """
    if abs(g_r0 + g_r1 - 1.0) > 1e-9:
        raise ValueError("g_r0 + g_r1 must equal 1")
    if g_l == 0.0:
        return -math.inf
    if g_l == 1.0:
        return math.inf
    if not 0.0 < g_l < 1.0:
        raise ValueError("g_l must lie in [0, 1]")

    def f(b: float) -> float:
        return g_r0 * _logistic(b) + g_r1 * _logistic(b + beta1) - g_l

    lo, hi = -_BRACKET, _BRACKET
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise NoRootInBracket(g_l, f_lo + g_l, f_hi + g_l)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
        if abs(f_mid) < 1e-12 and hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def _solve_levels(tables: EmpiricalTables, beta1: float) -> np.ndarray:
    g_l = tables.g_l_vector()
    g_r = tables.g_r_matrix()
    return np.array([
        solve_beta_x(float(g_l[x]), float(g_r[x, 0]), float(g_r[x, 1]), beta1)
        for x in range(tables.k_levels)
    ])


def _gm_per_level(beta_x: np.ndarray, beta1: float):
    def gm(x: int, y: int) -> float:
        b = beta_x[x]
        if b == -math.inf:
            return 0.0
        if b == math.inf:
            return 1.0
        return _logistic(b + beta1 * y)
    return gm


def _theta_at_beta1(tables: EmpiricalTables, beta1: float,
                    model_consistent_s1: bool) -> tuple[np.ndarray, ThetaBreakdown]:
    beta_x = _solve_levels(tables, beta1)
    breakdown = theta_from_tables(tables, _gm_per_level(beta_x, beta1),
                                  model_consistent_s1=model_consistent_s1)
    return beta_x, breakdown


def sensitivity_sweep(dataset: Dataset, beta1_values,
                      boot_config: BootstrapConfig | None = None, *,
                      t0: float | None = None,
                      model_consistent_s1: bool = False) -> list[SensitivityResult]:
    """Contrast estimates across a grid of fixed outcome coefficients.

    For each grid value the per-level offsets are solved independently and
    the contrast assembled; with ``boot_config`` a pivotal interval is added,
    re-solving the offsets inside every replicate. Levels whose empirical
    response gain is exactly zero contribute a zero response probability via
    the ``-inf`` sentinel. Works at any number of covariate levels (each
    solve uses a single equation).
    """
    beta1_values = [float(b) for b in beta1_values]
    tables = EmpiricalTables.from_dataset(dataset, t0=t0)

    boot_tables: list[EmpiricalTables] = []
    if boot_config is not None:
        stratified = boot_config.resampling == STRATIFIED_BY_ARM
        for rng in _replicate_rngs(boot_config.seed, boot_config.n_replicates):
            star = resample(dataset, rng, stratify_by_arm=stratified)
            try:
                boot_tables.append(EmpiricalTables.from_dataset(star, t0=t0))
            except ESTIMATION_ERRORS:
                boot_tables.append(None)

    results = []
    for beta1 in beta1_values:
        beta_x, breakdown = _theta_at_beta1(tables, beta1, model_consistent_s1)
        ci = None
        if boot_config is not None:
            boot_thetas = []
            n_failed = 0
            for star_tables in boot_tables:
                if star_tables is None:
                    n_failed += 1
                    continue
                try:
                    _, star_breakdown = _theta_at_beta1(star_tables, beta1,
                                                        model_consistent_s1)
                except ESTIMATION_ERRORS:
                    n_failed += 1
                    continue
                boot_thetas.append(star_breakdown.theta_hat)
            if n_failed > 0.10 * boot_config.n_replicates:
                raise TooManyFailedReplicates(n_failed, boot_config.n_replicates)
            ci = pivotal_ci(breakdown.theta_hat, boot_thetas, boot_config.alpha)
        results.append(SensitivityResult(
            beta1_fixed=beta1,
            beta_x_hat=beta_x,
            theta_hat=breakdown.theta_hat,
            ci=ci,
        ))
    return results
