"""Trial data-generating process, exact-effect oracle, and Monte Carlo bench.

The generator draws complete counterfactual rows (both potential responses
and both potential outcomes) and reveals only the arm actually assigned, so
structural monotonicity and arm-independence hold by construction and the
hidden columns stay available for oracle checks. Three named presets encode
the benchmark parameterizations used throughout the test-suite.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy.special import expit

from .bootstrap import ESTIMATION_ERRORS, BootstrapConfig, bootstrap_estimate
from .data import Dataset, ModelParams, StratumProbabilities, _frozen
from .empirical import EmpiricalTables
from .errors import TooManyFailedReplicates
from .model import FitConfig

#: (s0, s1, y0) histories that monotonicity allows.
_VALID_HISTORIES = (
    (0, 0, 0), (0, 0, 1),
    (0, 1, 0), (0, 1, 1),
    (1, 1, 0), (1, 1, 1),
)


@dataclass(frozen=True)
class DgpSpec:
    """Complete description of the simulated trial population.

    ``p_y0_given_s0_x[j, x]`` is the control-outcome success probability for
    response status ``j``; ``p_y1`` maps each attainable ``(s0, s1, y0)``
    history to the treated-outcome success probability (covariate enters the
    treated outcome only through the history).
    """

    px: np.ndarray
    p_s0_given_x: np.ndarray
    p_y0_given_s0_x: np.ndarray
    beta: ModelParams
    p_y1: Mapping[tuple[int, int, int], float]
    p_treat: float = 0.5
    n: int = 1000

    def __post_init__(self):
        px = np.asarray(self.px, dtype=float)
        p_s0 = np.asarray(self.p_s0_given_x, dtype=float)
        p_y0 = np.asarray(self.p_y0_given_s0_x, dtype=float)
        k = px.shape[0]
        if px.ndim != 1 or k < 1:
            raise ValueError("px must be a nonempty vector")
        if abs(px.sum() - 1.0) > 1e-12 or np.any(px < 0):
            raise ValueError("px must be a probability distribution")
        if p_s0.shape != (k,) or p_y0.shape != (2, k):
            raise ValueError("conditional probability tables have wrong shape")
        for name, arr in (("p_s0_given_x", p_s0), ("p_y0_given_s0_x", p_y0)):
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        if set(self.p_y1) != set(_VALID_HISTORIES):
            raise ValueError("p_y1 must have exactly the six attainable histories")
        if any(not 0 <= v <= 1 for v in self.p_y1.values()):
            raise ValueError("p_y1 entries must lie in [0, 1]")
        if not 0 < self.p_treat < 1:
            raise ValueError("p_treat must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "px", _frozen(px))
        object.__setattr__(self, "p_s0_given_x", _frozen(p_s0))
        object.__setattr__(self, "p_y0_given_s0_x", _frozen(p_y0))
        object.__setattr__(self, "p_y1", dict(self.p_y1))

    @property
    def k_levels(self) -> int:
        return int(self.px.shape[0])

    def p_y1_array(self) -> np.ndarray:
        """Dense (s0, s1, y0) lookup; the impossible (1, 0, *) cells are zero."""
        table = np.zeros((2, 2, 2))
        for (s0, s1, y0), value in self.p_y1.items():
            table[s0, s1, y0] = value
        return table


_BASE = dict(
    px=np.full(4, 0.25),
    p_s0_given_x=np.array([0.30, 0.25, 0.25, 0.20]),
    p_y0_given_s0_x=np.array([
        [0.70, 0.65, 0.60, 0.55],
        [0.84, 0.78, 0.72, 0.66],
    ]),
    p_y1={
        (0, 0, 0): 0.50, (0, 0, 1): 0.60,
        (0, 1, 0): 0.85, (0, 1, 1): 0.90,
        (1, 1, 0): 0.85, (1, 1, 1): 0.90,
    },
    p_treat=0.5,
)

_PRESET_BETAS = {
    "setting1": ModelParams(-3.0, -5.0, 0.2),
    "setting2": ModelParams(-5.0, -1.0, -2.0),
    "setting3": ModelParams(-7.0, 3.0, 0.2),
}

PRESET_NAMES = tuple(_PRESET_BETAS)


def make_preset(name: str, n: int = 1000) -> DgpSpec:
    """One of the three named benchmark populations at sample size ``n``."""
    if name not in _PRESET_BETAS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return DgpSpec(beta=_PRESET_BETAS[name], n=n, **_BASE)


@dataclass(frozen=True)
class SimulatedTrial:
    """Observed dataset plus the hidden counterfactual columns."""

    dataset: Dataset
    z: np.ndarray
    x: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    y0: np.ndarray
    y1: np.ndarray


def simulate_dataset(spec: DgpSpec, rng: np.random.Generator) -> SimulatedTrial:
    """Draw a complete trial; the dataset exposes only each subject's assigned arm."""
    n = spec.n
    x = rng.choice(spec.k_levels, size=n, p=spec.px)
    s0 = (rng.random(n) < spec.p_s0_given_x[x]).astype(np.int8)
    y0 = (rng.random(n) < spec.p_y0_given_s0_x[s0, x]).astype(np.int8)
    b = spec.beta
    gain = expit(b.beta0 + b.beta1 * y0 + b.beta2 * x)
    s1 = np.where(s0 == 1, np.int8(1), (rng.random(n) < gain).astype(np.int8))
    y1 = (rng.random(n) < spec.p_y1_array()[s0, s1, y0]).astype(np.int8)
    z = (rng.random(n) < spec.p_treat).astype(np.int8)
    s = np.where(z == 1, s1, s0)
    y = np.where(z == 1, y1, y0)
    dataset = Dataset(z=z, x=x, s=s, y=y, k_levels=spec.k_levels)
    return SimulatedTrial(dataset=dataset, z=z, x=x, s0=s0, s1=s1, y0=y0, y1=y1)


def _joint_probabilities(spec: DgpSpec) -> tuple[float, float, float]:
    """(P{S1=1}, P{Y0=1, S1=1}, P{Y1=1, S1=1}) by exact enumeration over (x, y0)."""
    px = spec.px
    p_s0 = spec.p_s0_given_x
    p_y0 = spec.p_y0_given_s0_x
    b = spec.beta
    xs = np.arange(spec.k_levels)
    gain = expit(b.beta0 + b.beta2 * xs + b.beta1 * np.array([[0.0], [1.0]]))  # (y0, x)
    y0_dist = np.stack([1.0 - p_y0, p_y0])                                     # (y0, j, x)

    pr_s1 = float(np.sum(px * p_s0)
                  + np.sum(px * (1.0 - p_s0) * y0_dist[:, 0, :] * gain))
    pr_y0_s1 = float(np.sum(px * p_s0 * p_y0[1])
                     + np.sum(px * (1.0 - p_s0) * p_y0[0] * gain[1]))
    table = spec.p_y1_array()
    pr_y1_s1 = 0.0
    for y0 in (0, 1):
        pr_y1_s1 += float(np.sum(px * p_s0 * y0_dist[y0, 1, :]) * table[1, 1, y0])
        pr_y1_s1 += float(np.sum(px * (1.0 - p_s0) * y0_dist[y0, 0, :] * gain[y0])
                          * table[0, 1, y0])
    return pr_s1, pr_y0_s1, pr_y1_s1


def true_theta(spec: DgpSpec) -> float:
    """Exact responder-stratum effect implied by the generating process."""
    pr_s1, pr_y0_s1, pr_y1_s1 = _joint_probabilities(spec)
    return (pr_y1_s1 - pr_y0_s1) / pr_s1


def population_tables(spec: DgpSpec) -> EmpiricalTables:
    """Exact population analogue of the empirical tables (no sampling)."""
    b = spec.beta
    xs = np.arange(spec.k_levels)
    gain = expit(b.beta0 + b.beta2 * xs + b.beta1 * np.array([[0.0], [1.0]]))  # (y0, x)
    p_y0_nonresp = spec.p_y0_given_s0_x[0]
    g_r = np.column_stack([1.0 - p_y0_nonresp, p_y0_nonresp])
    response_gain = g_r[:, 0] * gain[0] + g_r[:, 1] * gain[1]
    p11 = spec.p_s0_given_x
    p01 = (1.0 - p11) * response_gain
    p00 = 1.0 - p11 - p01
    stratum = StratumProbabilities(p00=p00, p01=p01, p11=p11)
    pr_s1, _, pr_y1_s1 = _joint_probabilities(spec)
    return EmpiricalTables.from_population(
        px=spec.px,
        stratum=stratum,
        g_r=g_r,
        pr_y0_given_s0=spec.p_y0_given_s0_x,
        pr_y1_responders=pr_y1_s1 / pr_s1,
    )


@dataclass(frozen=True)
class McReport:
    """Aggregate metrics of one Monte Carlo cell (one population, one sample size)."""

    setting: str
    n: int
    n_replicates: int
    true_theta: float
    bias: float
    mse: float
    mean_ci_width: float
    coverage: float
    n_failed: int = 0

    def __post_init__(self):
        if self.mse < self.bias ** 2 - 1e-9:
            raise ValueError("mse cannot fall below squared bias")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")

    def row(self) -> tuple:
        return (self.setting, self.n, self.bias, self.mse,
                self.mean_ci_width, self.coverage)


MC_TABLE_COLUMNS = ("setting", "n", "bias", "mse", "ci_width", "ci_coverage")


def mc_table(reports) -> str:
    """Delimited table of Monte Carlo results, one row per report."""
    lines = ["\t".join(MC_TABLE_COLUMNS)]
    for rep in reports:
        setting, n, bias, mse, width, cov = rep.row()
        lines.append("\t".join([
            setting, str(n), f"{bias:.6g}", f"{mse:.6g}", f"{width:.6g}", f"{cov:.6g}",
        ]))
    return "\n".join(lines) + "\n"


def _mc_replicate(spec: DgpSpec, fit_config: FitConfig, boot_config: BootstrapConfig,
                  master_seed: int, index: int) -> tuple[float, float, float] | None:
    """One replicate: simulate, estimate, bootstrap. None when estimation fails."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    data_seq, boot_seq = seq.spawn(2)
    trial = simulate_dataset(spec, np.random.default_rng(data_seq))
    rep_config = replace(boot_config,
                         seed=int(boot_seq.generate_state(1, np.uint64)[0]))
    try:
        est = bootstrap_estimate(trial.dataset, fit_config, rep_config)
    except (*ESTIMATION_ERRORS, TooManyFailedReplicates):
        return None
    return est.theta_hat, est.ci_lower, est.ci_upper


def run_monte_carlo(spec: DgpSpec, n_replicates: int,
                    fit_config: FitConfig | None = None,
                    boot_config: BootstrapConfig | None = None, *,
                    label: str = "custom", n_jobs: int = 1) -> McReport:
    """Repeat the full pipeline ``n_replicates`` times and aggregate the metrics.

    Reports empirical bias and MSE of the point estimate against the exact
    effect, the mean pivotal-interval width, and the fraction of intervals
    covering the exact effect. Replicate RNG streams are keyed by replicate
    index from the bootstrap seed, so serial and parallel execution produce
    identical results.
    """
    if n_replicates < 2:
        raise ValueError("n_replicates must be at least 2")
    fit_config = fit_config or FitConfig()
    boot_config = boot_config or BootstrapConfig()
    args = [(spec, fit_config, boot_config, boot_config.seed, r)
            for r in range(n_replicates)]
    if n_jobs > 1:
        chunk = max(1, n_replicates // (4 * n_jobs))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_mc_replicate_star, args, chunksize=chunk))
    else:
        outcomes = [_mc_replicate(*a) for a in args]

    kept = [o for o in outcomes if o is not None]
    n_failed = n_replicates - len(kept)
    if n_failed > 0.10 * n_replicates:
        raise TooManyFailedReplicates(n_failed, n_replicates)
    theta = true_theta(spec)
    est = np.array([o[0] for o in kept])
    lower = np.array([o[1] for o in kept])
    upper = np.array([o[2] for o in kept])
    return McReport(
        setting=label,
        n=spec.n,
        n_replicates=len(kept),
        true_theta=theta,
        bias=float(est.mean() - theta),
        mse=float(np.mean((est - theta) ** 2)),
        mean_ci_width=float(np.mean(np.abs(upper - lower))),
        coverage=float(np.mean((lower <= theta) & (theta <= upper))),
        n_failed=n_failed,
    )


def _mc_replicate_star(args):
    return _mc_replicate(*args)


def default_n_jobs() -> int:
    return max(1, os.cpu_count() or 1)
