import numpy as np
import pytest

from pstratum import (
    BinaryOutcome,
    Dataset,
    MalformedRecord,
    SubjectRecord,
    SurvivalOutcome,
    tabulate,
    validate,
)
from helpers import arm_cells, dataset_from_cells


def test_from_records_binary_roundtrip():
    records = [
        SubjectRecord("a", 0, 0, 0, BinaryOutcome(1)),
        SubjectRecord("b", 0, 1, 1, BinaryOutcome(0)),
        SubjectRecord("c", 1, 0, 1, BinaryOutcome(1)),
        SubjectRecord("d", 1, 1, 0, BinaryOutcome(0)),
    ]
    ds = Dataset.from_records(records)
    assert ds.n == 4
    assert ds.k_levels == 2
    assert ds.outcome_kind == "binary"
    back = list(ds.records())
    assert [r.id for r in back] == ["a", "b", "c", "d"]
    assert back[2].outcome == BinaryOutcome(1)


def test_survival_requires_horizon():
    records = [SubjectRecord(0, 0, 0, 0, SurvivalOutcome(1.5, 1))]
    with pytest.raises(ValueError, match="horizon_t0"):
        Dataset.from_records(records)
    ds = Dataset.from_records(records, horizon_t0=3.0)
    assert ds.outcome_kind == "survival"


@pytest.mark.parametrize("field,value", [
    ("z", 2), ("s", -1), ("x", 5), ("y", 3),
])
def test_out_of_range_fields_identify_record(field, value):
    base = dict(id="bad", z=0, x=0, s=0)
    kwargs = dict(base)
    outcome = {"y": 1}
    if field == "y":
        outcome["y"] = value
    else:
        kwargs[field] = value
    rec = SubjectRecord(kwargs["id"], kwargs["z"], kwargs["x"], kwargs["s"],
                        BinaryOutcome(outcome["y"]))
    with pytest.raises(MalformedRecord, match="bad"):
        Dataset.from_records([rec], k_levels=2)


def test_mixed_outcome_kinds_rejected():
    records = [
        SubjectRecord(0, 0, 0, 0, BinaryOutcome(1)),
        SubjectRecord(1, 1, 0, 1, SurvivalOutcome(2.0, 1)),
    ]
    with pytest.raises(MalformedRecord):
        Dataset.from_records(records)


def test_dataset_arrays_are_immutable():
    ds = dataset_from_cells(arm_cells(0, 3, 1, 3, 2))
    with pytest.raises(ValueError):
        ds.z[0] = 1


def test_tabulate_single_level_unit_cells():
    ds = Dataset(z=[0, 0, 1, 1], x=[0, 0, 0, 0], s=[0, 1, 0, 1],
                 y=[1, 1, 1, 1], k_levels=1)
    counts = tabulate(ds)
    assert counts.n_zsx.tolist() == [[[1], [1]], [[1], [1]]]
    assert counts.n == 4


def test_tabulate_empty_level_counts_zero():
    ds = Dataset(z=[0, 1], x=[0, 0], s=[0, 1], y=[0, 1], k_levels=3)
    counts = tabulate(ds)
    assert counts.n_zsx[:, :, 1].sum() == 0
    assert counts.n_zsx[:, :, 2].sum() == 0
    assert counts.n == 2


def test_tabulate_large_dataset_reconciles():
    rng = np.random.default_rng(5)
    n = 1000
    ds = Dataset(z=rng.integers(0, 2, n), x=rng.integers(0, 4, n),
                 s=rng.integers(0, 2, n), y=rng.integers(0, 2, n), k_levels=4)
    counts = tabulate(ds)
    assert counts.n == n
    assert counts.n_zsxy.sum() == n


def test_tabulate_is_permutation_invariant():
    rng = np.random.default_rng(9)
    n = 200
    ds = Dataset(z=rng.integers(0, 2, n), x=rng.integers(0, 3, n),
                 s=rng.integers(0, 2, n), y=rng.integers(0, 2, n), k_levels=3)
    perm = rng.permutation(n)
    shuffled = ds.take(perm)
    assert np.array_equal(tabulate(ds).n_zsx, tabulate(shuffled).n_zsx)
    assert np.array_equal(tabulate(ds).n_zsxy, tabulate(shuffled).n_zsxy)


def test_validate_fully_populated_has_no_flags():
    cells = {}
    for x in range(4):
        cells.update(arm_cells(x, 10, 3, 10, 5))
    report = validate(dataset_from_cells(cells))
    assert report.ok
    assert report.flag_count == 0
    assert len(report.levels) == 4


def test_validate_flags_missing_control_cell():
    cells = {}
    for x in (0, 1, 3):
        cells.update(arm_cells(x, 8, 2, 8, 4))
    cells.update({(1, 0, 2, 1): 4, (1, 1, 2, 1): 4})  # treated only at x=2
    report = validate(dataset_from_cells(cells))
    assert (0, 2) in report.empty_arm_levels
    assert (1, 2) not in report.empty_arm_levels
    assert 2 in report.empty_control_nonresponder_levels


def test_validate_warns_on_response_rate_reversal():
    cells = {}
    for x in (0, 1, 2):
        cells.update(arm_cells(x, 10, 2, 10, 5))
    cells.update(arm_cells(3, 10, 2, 10, 1))  # q1 = 0.1 < q0 = 0.2
    report = validate(dataset_from_cells(cells))
    assert report.monotonicity_warnings == (3,)
    # a warning, not an error: the report carries it but nothing raises
    assert report.flag_count == 1
