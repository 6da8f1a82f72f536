"""Plug-in estimators computable directly from observed trial data.

Covers the maximum-likelihood principal-stratum probabilities, the two
empirical mixture ingredients used by the model fit (the probability that a
control non-responder would respond under treatment, and the control
non-responder outcome distribution), arm-conditional outcome probabilities,
and the Kaplan-Meier product-limit estimator used when the long-term outcome
is right-censored.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import BINARY, CountTable, Dataset, StratumProbabilities, _frozen, tabulate
from .errors import (
    DegenerateDenominator,
    EmptyArmAtLevel,
    EmptyCell,
    IncompleteFollowUpWarning,
)


def estimate_stratum_probs(counts: CountTable, x: int) -> tuple[float, float, float]:
    """Maximum-likelihood (p00, p01, p11) at covariate level ``x``.

    Writing ``q0`` and ``q1`` for the observed responder proportions in the
    control and treatment arm at ``x``:

    * if ``q1 >= q0`` the MLEs are the arm-specific proportions: always
      responders ``p11 = q0``, never responders ``p00 = 1 - q1``, and the
      remainder ``p01 = q1 - q0``;
    * if ``q1 < q0`` the likelihood is maximized on the boundary ``p01 = 0``
      and both arms pool: ``p11`` is the overall responder proportion at
      ``x`` and ``p00`` its complement.

    Ties ``q1 == q0`` take the first branch; both branches agree there.
    """
    n0 = counts.arm_size(0, x)
    n1 = counts.arm_size(1, x)
    if n0 == 0:
        raise EmptyArmAtLevel(0, x)
    if n1 == 0:
        raise EmptyArmAtLevel(1, x)
    q0 = counts.q_hat(0, x)
    q1 = counts.q_hat(1, x)
    if q1 >= q0:
        p00 = float(counts.n_zsx[1, 0, x]) / n1
        p11 = q0
        p01 = q1 - q0
    else:
        responders = float(counts.n_zsx[0, 1, x] + counts.n_zsx[1, 1, x])
        p11 = responders / (n0 + n1)
        p00 = 1.0 - p11
        p01 = 0.0
    return p00, p01, p11


def stratum_probabilities(counts: CountTable) -> StratumProbabilities:
    """Apply :func:`estimate_stratum_probs` at every covariate level."""
    cols = [estimate_stratum_probs(counts, x) for x in range(counts.k_levels)]
    p00, p01, p11 = (np.array(col) for col in zip(*cols))
    return StratumProbabilities(p00=p00, p01=p01, p11=p11)


def g_l_hat(stratum: StratumProbabilities, x: int) -> float:
    """Probability that a control non-responder at ``x`` would respond under treatment.

    Estimated as p01 / (p00 + p01); exactly 0 whenever the boundary branch of
    the stratum MLE fired.
    """
    p00, p01, _ = stratum.at(x)
    denom = p00 + p01
    if denom <= 0.0:
        raise DegenerateDenominator(
            f"no control non-responder mass at level x={x} (p00 + p01 = 0)"
        )
    return p01 / denom


def km_fit(times, events) -> "KmCurve":
    return KmCurve.fit(times, events)


@dataclass(frozen=True)
class KmCurve:
    """Product-limit survival curve over the distinct event times of a sample."""

    event_times: np.ndarray
    at_risk: np.ndarray
    n_events: np.ndarray
    survival: np.ndarray
    n: int
    max_time: float

    @classmethod
    def fit(cls, times, events) -> "KmCurve":
        times = np.asarray(times, dtype=float)
        events = np.asarray(events, dtype=np.int8)
        if times.size == 0:
            raise EmptyCell("no observations to fit a survival curve")
        if np.any(times < 0) or np.any(~np.isfinite(times)):
            raise ValueError("times must be finite and nonnegative")
        order = np.argsort(times, kind="stable")
        sorted_times = times[order]
        event_times, d = np.unique(sorted_times[events[order] == 1], return_counts=True)
        # Subjects censored at an event time are still at risk for it.
        r = times.size - np.searchsorted(sorted_times, event_times, side="left")
        surv = np.cumprod(1.0 - d / r)
        return cls(event_times=_frozen(event_times), at_risk=_frozen(r),
                   n_events=_frozen(d), survival=_frozen(surv),
                   n=int(times.size), max_time=float(sorted_times[-1]))

    def survival_at(self, t0: float) -> float:
        """Survival probability at ``t0``.

        Beyond the last observed time with the curve still above zero, the
        value is no longer defined by the data; the last defined value is
        returned and :class:`IncompleteFollowUpWarning` is issued.
        """
        if t0 < 0:
            raise ValueError("t0 must be nonnegative")
        idx = int(np.searchsorted(self.event_times, t0, side="right"))
        value = float(self.survival[idx - 1]) if idx > 0 else 1.0
        if t0 > self.max_time and value > 0.0:
            warnings.warn(
                f"horizon t0={t0:g} exceeds the last observed time {self.max_time:g}; "
                "returning the last defined survival value",
                IncompleteFollowUpWarning,
                stacklevel=2,
            )
        return value


def km_survival(times_events, t0: float) -> float:
    """Kaplan-Meier survival at ``t0`` from a collection of (time, event) pairs.

    ``event`` is 1 for an observed event and 0 for censoring; censored
    subjects leave the risk set after their time (events at a timestamp are
    counted before censorings at the same timestamp). With no censoring this
    reduces exactly to the proportion of times exceeding ``t0``.
    """
    pairs = np.asarray(list(times_events), dtype=float)
    if pairs.size == 0:
        raise EmptyCell("empty (time, event) collection")
    pairs = pairs.reshape(-1, 2)
    return KmCurve.fit(pairs[:, 0], pairs[:, 1]).survival_at(t0)


def _success_prob(dataset: Dataset, mask: np.ndarray, t0: float | None, what: str) -> float:
    """P(outcome success) in the subgroup: proportion for binary, KM at t0 for survival."""
    count = int(mask.sum())
    if count == 0:
        raise EmptyCell(f"no subjects: {what}")
    if dataset.outcome_kind == BINARY:
        return float(dataset.y[mask].sum()) / count
    horizon = dataset.horizon_t0 if t0 is None else t0
    return KmCurve.fit(dataset.time[mask], dataset.event[mask]).survival_at(horizon)


def g_r_hat(dataset: Dataset, x: int, y: int, t0: float | None = None) -> float:
    """Outcome distribution of control non-responders at level ``x``.

    Returns the proportion of control-arm non-responders at ``x`` whose
    outcome equals ``y`` (for survival data, the KM estimate at the horizon
    and its complement).
    """
    if y not in (0, 1):
        raise ValueError("y must be 0 or 1")
    mask = (dataset.z == 0) & (dataset.s == 0) & (dataset.x == x)
    p1 = _success_prob(dataset, mask, t0, f"control non-responders at x={x}")
    return p1 if y == 1 else 1.0 - p1


def outcome_prob_control(dataset: Dataset, s0: int, x: int, t0: float | None = None) -> float:
    """Control-arm outcome success probability given response status ``s0`` at level ``x``."""
    if s0 not in (0, 1):
        raise ValueError("s0 must be 0 or 1")
    mask = (dataset.z == 0) & (dataset.s == s0) & (dataset.x == x)
    return _success_prob(dataset, mask, t0, f"control subjects with s={s0} at x={x}")


def outcome_prob_treated_responders(dataset: Dataset, t0: float | None = None) -> float:
    """Outcome success probability among all treatment-arm responders (pooled over x)."""
    mask = (dataset.z == 1) & (dataset.s == 1)
    return _success_prob(dataset, mask, t0, "treatment-arm responders")


@dataclass(frozen=True)
class EmpiricalTables:
    """Every data-driven quantity the estimation pipeline consumes.

    Entries backed by an empty subgroup are stored as NaN; the accessor
    methods raise the matching error only when such an entry is actually
    needed. ``g_r[x, y]`` is the control non-responder outcome distribution,
    ``pr_y0_given_s0[j, x]`` the control-arm success probability given
    response status j, and ``pr_y1_responders`` the pooled treatment-arm
    responder success probability.
    """

    k_levels: int
    px_hat: np.ndarray
    stratum: StratumProbabilities
    g_l: np.ndarray
    g_r: np.ndarray
    pr_y0_given_s0: np.ndarray
    pr_y1_responders: float

    def __post_init__(self):
        px = np.asarray(self.px_hat, dtype=float)
        if px.shape != (self.k_levels,):
            raise ValueError("px_hat must have one entry per covariate level")
        if abs(px.sum() - 1.0) > 1e-12:
            raise ValueError("px_hat must sum to 1")
        for name, arr, shape in (
            ("g_l", self.g_l, (self.k_levels,)),
            ("g_r", self.g_r, (self.k_levels, 2)),
            ("pr_y0_given_s0", self.pr_y0_given_s0, (2, self.k_levels)),
        ):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
            defined = arr[~np.isnan(arr)]
            if np.any(defined < -1e-12) or np.any(defined > 1 + 1e-12):
                raise ValueError(f"{name} entries must lie in [0, 1]")
            object.__setattr__(self, name, _frozen(arr))
        row_sums = self.g_r.sum(axis=1)
        defined = ~np.isnan(row_sums)
        if np.any(np.abs(row_sums[defined] - 1.0) > 1e-12):
            raise ValueError("g_r rows must sum to 1")
        object.__setattr__(self, "px_hat", _frozen(px))

    @classmethod
    def from_dataset(cls, dataset: Dataset, t0: float | None = None) -> "EmpiricalTables":
        counts = tabulate(dataset)
        stratum = stratum_probabilities(counts)
        k = dataset.k_levels
        px = counts.n_zsx.sum(axis=(0, 1)) / dataset.n

        pr_y0 = np.full((2, k), np.nan)
        if dataset.outcome_kind == BINARY and t0 is None:
            # All conditionals are count ratios; avoid per-level record scans.
            cell = counts.n_zsx[0].astype(float)          # (s, x)
            succ = counts.n_zsxy[0, :, :, 1].astype(float)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(cell > 0, succ / np.where(cell > 0, cell, 1.0), np.nan)
            pr_y0[0] = ratio[0]
            pr_y0[1] = ratio[1]
            n_resp = counts.n_zsx[1, 1].sum()
            pr_y1 = counts.n_zsxy[1, 1, :, 1].sum() / n_resp if n_resp else np.nan
        else:
            for j in (0, 1):
                for x in range(k):
                    try:
                        pr_y0[j, x] = outcome_prob_control(dataset, j, x, t0)
                    except EmptyCell:
                        pass
            try:
                pr_y1 = outcome_prob_treated_responders(dataset, t0)
            except EmptyCell:
                pr_y1 = np.nan

        g_r = np.column_stack([1.0 - pr_y0[0], pr_y0[0]])
        denom = stratum.p00 + stratum.p01
        with np.errstate(invalid="ignore", divide="ignore"):
            g_l = np.where(denom > 0, stratum.p01 / np.where(denom > 0, denom, 1.0), np.nan)
        return cls(k_levels=k, px_hat=px, stratum=stratum, g_l=g_l, g_r=g_r,
                   pr_y0_given_s0=pr_y0, pr_y1_responders=float(pr_y1))

    @classmethod
    def from_population(cls, px, stratum: StratumProbabilities, g_r,
                        pr_y0_given_s0, pr_y1_responders: float) -> "EmpiricalTables":
        """Assemble tables from exact population quantities (no data)."""
        px = np.asarray(px, dtype=float)
        denom = stratum.p00 + stratum.p01
        with np.errstate(invalid="ignore", divide="ignore"):
            g_l = np.where(denom > 0, stratum.p01 / np.where(denom > 0, denom, 1.0), np.nan)
        return cls(k_levels=px.shape[0], px_hat=px, stratum=stratum, g_l=g_l,
                   g_r=np.asarray(g_r, dtype=float),
                   pr_y0_given_s0=np.asarray(pr_y0_given_s0, dtype=float),
                   pr_y1_responders=float(pr_y1_responders))

    # -- accessors that surface the reason an entry is missing ------------

    def g_l_vector(self) -> np.ndarray:
        bad = np.flatnonzero(np.isnan(self.g_l))
        if bad.size:
            raise DegenerateDenominator(
                f"no control non-responder mass at level x={int(bad[0])}"
            )
        return self.g_l

    def g_r_matrix(self) -> np.ndarray:
        bad = np.flatnonzero(np.isnan(self.g_r[:, 1]))
        if bad.size:
            raise EmptyCell(f"no control non-responders observed at x={int(bad[0])}")
        return self.g_r

    def outcome_prob_control(self, s0: int, x: int) -> float:
        value = self.pr_y0_given_s0[s0, x]
        if np.isnan(value):
            raise EmptyCell(f"no control subjects with s={s0} at x={x}")
        return float(value)

    def treated_responder_prob(self) -> float:
        if np.isnan(self.pr_y1_responders):
            raise EmptyCell("no treatment-arm responders")
        return float(self.pr_y1_responders)
