"""Nonparametric resampling and the pivotal (basic) bootstrap interval.

Every replicate re-runs the whole estimation pipeline (tables, coefficient
fit, contrast assembly) on a with-replacement copy of the data, so the
interval reflects the variability of the fitted model coefficients as well
as the plug-in tables. Replicate RNG streams are spawned from one seed
sequence, which makes results identical whether replicates run serially or
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CausalEstimate, Dataset
from .errors import (
    DegenerateDenominator,
    EmptyArmAtLevel,
    EmptyCell,
    NoRootInBracket,
    TooManyFailedReplicates,
    ZeroResponderMass,
)
from .estimand import fit_and_estimate
from .model import FitConfig

WHOLE_SAMPLE = "whole-sample"
STRATIFIED_BY_ARM = "stratified-by-arm"

#: Exceptions that mark a replicate as failed rather than aborting the run.
ESTIMATION_ERRORS = (
    EmptyArmAtLevel,
    EmptyCell,
    DegenerateDenominator,
    ZeroResponderMass,
    NoRootInBracket,
)

_MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class BootstrapConfig:
    n_replicates: int = 500
    alpha: float = 0.05
    seed: int = 0
    resampling: str = WHOLE_SAMPLE

    def __post_init__(self):
        if self.n_replicates < 2:
            raise ValueError("n_replicates must be at least 2")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.resampling not in (WHOLE_SAMPLE, STRATIFIED_BY_ARM):
            raise ValueError(f"unknown resampling mode {self.resampling!r}")


def resample(dataset: Dataset, rng: np.random.Generator, *,
             stratify_by_arm: bool = False) -> Dataset:
    """Same-size with-replacement draw; stratified mode preserves per-arm counts."""
    n = dataset.n
    if not stratify_by_arm:
        return dataset.take(rng.integers(0, n, size=n))
    parts = []
    for arm in (0, 1):
        arm_idx = np.flatnonzero(dataset.z == arm)
        if arm_idx.size:
            parts.append(arm_idx[rng.integers(0, arm_idx.size, size=arm_idx.size)])
    return dataset.take(np.concatenate(parts))


def pivotal_ci(theta_hat: float, boot_thetas, alpha: float = 0.05) -> tuple[float, float]:
    """Basic bootstrap interval (2*theta - upper quantile, 2*theta - lower quantile).

    Quantiles use the inclusive linear-interpolation rule on the sorted
    replicate values. The construction is equivariant under increasing affine
    maps and invariant to permutations of the replicate values.
    """
    boot = np.asarray(list(boot_thetas), dtype=float)
    if boot.size == 0:
        raise ValueError("boot_thetas must be nonempty")
    q_lo, q_hi = np.quantile(boot, [alpha / 2.0, 1.0 - alpha / 2.0], method="linear")
    return 2.0 * theta_hat - float(q_hi), 2.0 * theta_hat - float(q_lo)


def _replicate_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def bootstrap_estimate(dataset: Dataset, fit_config: FitConfig | None = None,
                       boot_config: BootstrapConfig | None = None, *,
                       t0: float | None = None,
                       model_consistent_s1: bool = False) -> CausalEstimate:
    """Point estimate on the original data plus a pivotal bootstrap interval.

    Replicates whose estimation fails (a resample can lose whole cells) are
    dropped and counted; more than 10% failures aborts with
    :class:`TooManyFailedReplicates`.
    """
    boot_config = boot_config or BootstrapConfig()
    fit_config = fit_config or FitConfig()
    breakdown, fit, _ = fit_and_estimate(dataset, fit_config, t0=t0,
                                         model_consistent_s1=model_consistent_s1)

    stratified = boot_config.resampling == STRATIFIED_BY_ARM
    boot_thetas = []
    n_failed = 0
    for rng in _replicate_rngs(boot_config.seed, boot_config.n_replicates):
        star = resample(dataset, rng, stratify_by_arm=stratified)
        try:
            star_breakdown, _, _ = fit_and_estimate(star, fit_config, t0=t0,
                                                    model_consistent_s1=model_consistent_s1)
        except ESTIMATION_ERRORS:
            n_failed += 1
            continue
        boot_thetas.append(star_breakdown.theta_hat)

    if n_failed > _MAX_FAILURE_FRACTION * boot_config.n_replicates:
        raise TooManyFailedReplicates(n_failed, boot_config.n_replicates)
    lower, upper = pivotal_ci(breakdown.theta_hat, boot_thetas, boot_config.alpha)
    return CausalEstimate(
        theta_hat=breakdown.theta_hat,
        ci_lower=lower,
        ci_upper=upper,
        alpha=boot_config.alpha,
        beta_hat=fit.beta_hat,
        objective_value=fit.objective_value,
        n_bootstrap=len(boot_thetas),
        n_failed=n_failed,
    )
