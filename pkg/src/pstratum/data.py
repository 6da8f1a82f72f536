"""Domain types: subject records, datasets, cell counts, and validation.

A :class:`Dataset` stores subject-level trial data in immutable column
arrays. Records carry a treatment arm ``z``, a discrete baseline covariate
``x`` in ``0..K``, a binary intermediate response ``s``, and a long-term
outcome that is either binary (``y``) or a right-censorable event time
(``time``, ``event``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import MalformedRecord

BINARY = "binary"
SURVIVAL = "survival"


@dataclass(frozen=True)
class BinaryOutcome:
    y: int


@dataclass(frozen=True)
class SurvivalOutcome:
    time: float
    event: int


@dataclass(frozen=True)
class SubjectRecord:
    """One trial participant's observed data."""

    id: object
    z: int
    x: int
    s: int
    outcome: BinaryOutcome | SurvivalOutcome


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the counterfactual response model (intercept, outcome, covariate)."""

    beta0: float
    beta1: float
    beta2: float

    def __post_init__(self):
        for name in ("beta0", "beta1", "beta2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ModelParams":
        b = np.asarray(arr, dtype=float)
        return cls(float(b[0]), float(b[1]), float(b[2]))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StratumProbabilities:
    """Per-level membership probabilities of the three principal strata.

    ``p00`` is never-responder mass, ``p01`` is treatment-gained-responder
    mass, and ``p11`` is always-responder mass; at every covariate level the
    three sum to one and ``p01`` is nonnegative (the respond-under-control-only
    stratum is empty by assumption).
    """

    p00: np.ndarray
    p01: np.ndarray
    p11: np.ndarray

    def __post_init__(self):
        p00, p01, p11 = (np.asarray(p, dtype=float) for p in (self.p00, self.p01, self.p11))
        if not (p00.shape == p01.shape == p11.shape) or p00.ndim != 1:
            raise ValueError("stratum probabilities must be equal-length vectors")
        for name, p in (("p00", p00), ("p01", p01), ("p11", p11)):
            if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
                raise ValueError(f"{name} outside [0, 1]")
        total = p00 + p01 + p11
        if np.any(np.abs(total - 1.0) > 1e-12):
            raise ValueError("stratum probabilities must sum to 1 at every level")
        object.__setattr__(self, "p00", _frozen(p00))
        object.__setattr__(self, "p01", _frozen(p01))
        object.__setattr__(self, "p11", _frozen(p11))

    @property
    def k_levels(self) -> int:
        return self.p00.shape[0]

    def at(self, x: int) -> tuple[float, float, float]:
        return float(self.p00[x]), float(self.p01[x]), float(self.p11[x])


@dataclass(frozen=True)
class CountTable:
    """Cell counts ``n_zsx[z, s, x]``, plus per-outcome counts for binary data."""

    k_levels: int
    n_zsx: np.ndarray
    n_zsxy: np.ndarray | None = None

    def __post_init__(self):
        n_zsx = np.asarray(self.n_zsx)
        if n_zsx.shape != (2, 2, self.k_levels):
            raise ValueError("n_zsx must have shape (2, 2, k_levels)")
        if np.any(n_zsx < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "n_zsx", _frozen(n_zsx))
        if self.n_zsxy is not None:
            n_zsxy = np.asarray(self.n_zsxy)
            if n_zsxy.shape != (2, 2, self.k_levels, 2):
                raise ValueError("n_zsxy must have shape (2, 2, k_levels, 2)")
            if np.any(n_zsxy.sum(axis=3) != n_zsx):
                raise ValueError("outcome counts must reconcile with cell counts")
            object.__setattr__(self, "n_zsxy", _frozen(n_zsxy))

    @property
    def n(self) -> int:
        return int(self.n_zsx.sum())

    def arm_size(self, z: int, x: int) -> int:
        return int(self.n_zsx[z, :, x].sum())

    def q_hat(self, z: int, x: int) -> float:
        """Observed responder proportion in arm ``z`` at level ``x``."""
        total = self.arm_size(z, x)
        if total == 0:
            raise ZeroDivisionError(f"arm z={z} empty at x={x}")
        return float(self.n_zsx[z, 1, x]) / total


@dataclass(frozen=True)
class CausalEstimate:
    """Point estimate of the responder-stratum effect with its pivotal bootstrap CI."""

    theta_hat: float
    ci_lower: float
    ci_upper: float
    alpha: float
    beta_hat: ModelParams
    objective_value: float
    n_bootstrap: int
    n_failed: int = 0

    def __post_init__(self):
        if self.ci_lower > self.ci_upper:
            raise ValueError("ci_lower must not exceed ci_upper")
        if self.objective_value < 0:
            raise ValueError("objective_value must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    """Immutable column-oriented container of subject records.

    ``y`` is set for binary outcomes; ``time``/``event`` are set for survival
    outcomes, in which case ``horizon_t0`` (the evaluation horizon) is
    required. All arrays are read-only after construction, so a dataset can
    be shared freely across threads and worker processes.
    """

    z: np.ndarray
    x: np.ndarray
    s: np.ndarray
    k_levels: int
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    horizon_t0: float | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int8)
        x = np.asarray(self.x, dtype=np.int64)
        s = np.asarray(self.s, dtype=np.int8)
        n = z.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one record")
        if x.shape[0] != n or s.shape[0] != n:
            raise ValueError("column lengths differ")
        ids = self.ids
        if ids is None:
            ids = np.arange(n)
        ids = np.asarray(ids)
        object.__setattr__(self, "z", _frozen(z))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "ids", _frozen(ids))

        binary = self.y is not None
        survival = self.time is not None or self.event is not None
        if binary == survival:
            raise ValueError("exactly one of y or (time, event) must be provided")
        if binary:
            y = np.asarray(self.y, dtype=np.int8)
            if y.shape[0] != n:
                raise ValueError("column lengths differ")
            object.__setattr__(self, "y", _frozen(y))
            if self.horizon_t0 is not None:
                raise ValueError("horizon_t0 only applies to survival outcomes")
        else:
            if self.time is None or self.event is None:
                raise ValueError("survival outcomes need both time and event")
            time = np.asarray(self.time, dtype=float)
            event = np.asarray(self.event, dtype=np.int8)
            if time.shape[0] != n or event.shape[0] != n:
                raise ValueError("column lengths differ")
            object.__setattr__(self, "time", _frozen(time))
            object.__setattr__(self, "event", _frozen(event))
            if self.horizon_t0 is None:
                raise ValueError("horizon_t0 is required for survival outcomes")
            if self.horizon_t0 < 0:
                raise ValueError("horizon_t0 must be nonnegative")
        self._check_ranges()

    def _check_ranges(self):
        self.check_records()

    def check_records(self):
        """Raise :class:`MalformedRecord` for the first field out of range, if any."""
        def first_bad(mask, reason):
            idx = np.flatnonzero(mask)
            if idx.size:
                i = int(idx[0])
                raise MalformedRecord(self.ids[i], reason)

        first_bad(~np.isin(self.z, (0, 1)), "z must be 0 or 1")
        first_bad(~np.isin(self.s, (0, 1)), "s must be 0 or 1")
        first_bad((self.x < 0) | (self.x >= self.k_levels),
                  f"x must lie in 0..{self.k_levels - 1}")
        if self.y is not None:
            first_bad(~np.isin(self.y, (0, 1)), "y must be 0 or 1")
        else:
            first_bad(~np.isfinite(self.time) | (self.time < 0),
                      "time must be finite and nonnegative")
            first_bad(~np.isin(self.event, (0, 1)), "event must be 0 or 1")

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord], k_levels: int | None = None,
                     horizon_t0: float | None = None) -> "Dataset":
        records = list(records)
        if not records:
            raise ValueError("dataset must contain at least one record")
        first_kind = type(records[0].outcome)
        for rec in records:
            if type(rec.outcome) is not first_kind:
                raise MalformedRecord(rec.id, "mixed outcome kinds in one dataset")
        ids = np.array([rec.id for rec in records], dtype=object)
        z = [rec.z for rec in records]
        x = [rec.x for rec in records]
        s = [rec.s for rec in records]
        if k_levels is None:
            k_levels = int(max(x)) + 1
        if first_kind is BinaryOutcome:
            return cls(z=z, x=x, s=s, k_levels=k_levels, ids=ids,
                       y=[rec.outcome.y for rec in records])
        return cls(z=z, x=x, s=s, k_levels=k_levels, ids=ids,
                   time=[rec.outcome.time for rec in records],
                   event=[rec.outcome.event for rec in records],
                   horizon_t0=horizon_t0)

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def outcome_kind(self) -> str:
        return BINARY if self.y is not None else SURVIVAL

    def records(self) -> Iterator[SubjectRecord]:
        for i in range(self.n):
            if self.y is not None:
                outcome = BinaryOutcome(int(self.y[i]))
            else:
                outcome = SurvivalOutcome(float(self.time[i]), int(self.event[i]))
            yield SubjectRecord(self.ids[i], int(self.z[i]), int(self.x[i]),
                                int(self.s[i]), outcome)

    def take(self, indices) -> "Dataset":
        """New dataset holding rows ``indices`` (with repetition allowed)."""
        idx = np.asarray(indices)
        kwargs = dict(z=self.z[idx], x=self.x[idx], s=self.s[idx],
                      k_levels=self.k_levels, ids=self.ids[idx])
        if self.y is not None:
            kwargs["y"] = self.y[idx]
        else:
            kwargs.update(time=self.time[idx], event=self.event[idx],
                          horizon_t0=self.horizon_t0)
        return Dataset(**kwargs)


def tabulate(dataset: Dataset) -> CountTable:
    """Exact cell counts per (arm, response, covariate level); sums reconcile with n.

    Invariant to record order.
    """
    k = dataset.k_levels
    flat = (dataset.z.astype(np.int64) * 2 + dataset.s) * k + dataset.x
    n_zsx = np.bincount(flat, minlength=4 * k).reshape(2, 2, k)
    n_zsxy = None
    if dataset.y is not None:
        flat_y = flat * 2 + dataset.y
        n_zsxy = np.bincount(flat_y, minlength=8 * k).reshape(2, 2, k, 2)
    return CountTable(k_levels=k, n_zsx=n_zsx, n_zsxy=n_zsxy)


@dataclass(frozen=True)
class LevelDiagnostics:
    """Per-covariate-level cell layout used by :func:`validate`."""

    x: int
    n_control: int
    n_treated: int
    n_control_responders: int
    n_treated_responders: int
    q0_hat: float | None
    q1_hat: float | None


@dataclass(frozen=True)
class ValidationReport:
    levels: tuple[LevelDiagnostics, ...]
    empty_arm_levels: tuple[tuple[int, int], ...] = field(default=())
    empty_control_nonresponder_levels: tuple[int, ...] = field(default=())
    monotonicity_warnings: tuple[int, ...] = field(default=())

    @property
    def flag_count(self) -> int:
        return (len(self.empty_arm_levels)
                + len(self.empty_control_nonresponder_levels)
                + len(self.monotonicity_warnings))

    @property
    def ok(self) -> bool:
        return self.flag_count == 0


def validate(dataset: Dataset) -> ValidationReport:
    """Check record fields and report the per-level cell layout.

    Flags, per covariate level: empty (arm, level) cells, empty
    control-non-responder cells (these make the control-arm outcome mixture
    inestimable), and empirical orderings where the treatment-arm response
    rate falls below the control arm's. The last is a warning only; the
    stratum estimator has a dedicated branch for it.
    """
    dataset.check_records()
    counts = tabulate(dataset)
    levels = []
    empty_arms = []
    empty_ctrl_nonresp = []
    mono = []
    for x in range(dataset.k_levels):
        n0 = counts.arm_size(0, x)
        n1 = counts.arm_size(1, x)
        q0 = counts.q_hat(0, x) if n0 else None
        q1 = counts.q_hat(1, x) if n1 else None
        levels.append(LevelDiagnostics(
            x=x, n_control=n0, n_treated=n1,
            n_control_responders=int(counts.n_zsx[0, 1, x]),
            n_treated_responders=int(counts.n_zsx[1, 1, x]),
            q0_hat=q0, q1_hat=q1,
        ))
        if n0 == 0:
            empty_arms.append((0, x))
        if n1 == 0:
            empty_arms.append((1, x))
        if counts.n_zsx[0, 0, x] == 0:
            empty_ctrl_nonresp.append(x)
        if q0 is not None and q1 is not None and q1 < q0:
            mono.append(x)
    return ValidationReport(
        levels=tuple(levels),
        empty_arm_levels=tuple(empty_arms),
        empty_control_nonresponder_levels=tuple(empty_ctrl_nonresp),
        monotonicity_warnings=tuple(mono),
    )
