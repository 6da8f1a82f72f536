"""Exception and warning types shared across the package."""

from __future__ import annotations


class PstratumError(Exception):
    """Base class for all package-specific errors."""


class MalformedRecord(PstratumError):
    """A subject record has a field outside its allowed range."""

    def __init__(self, record_id, reason: str):
        self.record_id = record_id
        self.reason = reason
        super().__init__(f"record {record_id!r}: {reason}")


class SchemaError(PstratumError):
    """An input file does not have the expected columns."""


class ParseError(PstratumError):
    """An input file has an unreadable or missing value."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyArmAtLevel(PstratumError):
    """One treatment arm has no subjects at a covariate level."""

    def __init__(self, arm: int, level: int):
        self.arm = arm
        self.level = level
        super().__init__(f"arm z={arm} has no subjects at covariate level x={level}")


class EmptyCell(PstratumError):
    """A conditional probability was requested for an empty subgroup."""


class DegenerateDenominator(PstratumError):
    """A ratio estimate has zero probability mass in its denominator."""


class ZeroResponderMass(PstratumError):
    """No covariate level carries responder probability mass."""


class NoRootInBracket(PstratumError):
    """The target value lies outside the attainable range on the search bracket."""

    def __init__(self, target: float, low: float, high: float):
        self.target = target
        self.attained_range = (low, high)
        super().__init__(
            f"target {target:.6g} outside attainable range [{low:.6g}, {high:.6g}]"
        )


class TooManyFailedReplicates(PstratumError):
    """More than the tolerated fraction of resampling replicates failed."""

    def __init__(self, n_failed: int, n_total: int):
        self.n_failed = n_failed
        self.n_total = n_total
        super().__init__(f"{n_failed} of {n_total} replicates failed (cap is 10%)")


class StratumNotIdentified(PstratumError):
    """A stratum-specific contrast is not empirically identified on this dataset."""


class IncompleteFollowUpWarning(UserWarning):
    """The requested horizon exceeds observed follow-up; the last defined value is used."""


class UnderIdentifiedWarning(UserWarning):
    """Fewer covariate levels than model parameters; the fit is not unique."""
