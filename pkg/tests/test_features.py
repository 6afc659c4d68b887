from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from puea.features import (
    ATTACK_LABEL,
    CSV_HEADER,
    PU_LABEL,
    Dataset,
    DatasetError,
    Example,
    FeatureVector,
    build_dataset,
    dataset_from_energies,
    quantile,
    read_csv,
    summarize_slot,
    write_csv,
)
from puea.scenario import SlotReport, Source

finite = st.floats(-200, 200, allow_nan=False, allow_infinity=False)
energy_rows = arrays(np.float64, st.integers(2, 60), elements=finite)


def test_summarize_examples():
    fv = summarize_slot([1, 2, 3, 4, 5])
    assert fv == FeatureVector(3.0, 2.0, 3.0, 4.0, 2.0)
    fv = summarize_slot([5, 5, 5, 5])
    assert fv == FeatureVector(5.0, 0.0, 5.0, 5.0, 5.0)
    assert summarize_slot([1, 2, 3, 4]).median == 2.5
    with pytest.raises(ValueError):
        summarize_slot([1.0])


def test_summarize_accepts_slot_report():
    r = SlotReport(3, np.array([1.0, 2.0, 3.0, 4.0, 5.0]), Source.ATTACKER)
    assert summarize_slot(r).mean == 3.0


def test_quantile_examples():
    assert quantile([1, 2, 3, 4, 5], 0.25) == 2.0
    assert quantile([1, 2, 3, 4], 0.5) == 2.5
    for q in (0.0, 0.3, 1.0):
        assert quantile([7], q) == 7.0
    assert quantile([4, 1, 3, 2], 1.0) == 4.0
    with pytest.raises(ValueError):
        quantile([], 0.5)
    with pytest.raises(ValueError):
        quantile([1, 2], 1.5)


@given(energy_rows, st.randoms(use_true_random=False))
def test_permutation_invariance(values, rnd):
    perm = list(values)
    rnd.shuffle(perm)
    a = summarize_slot(values).as_array()
    b = summarize_slot(perm).as_array()
    # the mean sums in a different order; order statistics are exact
    assert np.allclose(a[:2], b[:2], rtol=1e-12, atol=1e-9)
    assert np.array_equal(a[2:], b[2:])


@given(energy_rows, st.floats(-50, 50))
def test_shift_equivariance(values, c):
    a = summarize_slot(values).as_array()
    b = summarize_slot(values + c).as_array()
    assert np.allclose(b[[0, 2, 3, 4]], a[[0, 2, 3, 4]] + c, atol=1e-9)
    assert b[1] == pytest.approx(a[1], rel=1e-6, abs=1e-6)


@given(energy_rows, st.floats(0, 1), st.floats(0, 1))
def test_quantile_ordering(values, q1, q2):
    lo, hi = sorted((q1, q2))
    assert quantile(values, lo) <= quantile(values, hi)


@given(energy_rows)
def test_feature_vector_invariants(values):
    fv = summarize_slot(values)
    assert fv.lower_quartile <= fv.median <= fv.upper_quartile
    assert fv.variance >= 0


def test_quantile_matches_numpy_linear():
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.normal(size=rng.integers(1, 30))
        for q in (0.0, 0.1, 0.25, 0.5, 0.75, 0.99, 1.0):
            assert quantile(v, q) == pytest.approx(np.quantile(v, q, method="linear"), abs=1e-12)


def test_build_dataset():
    rng = np.random.default_rng(1)
    pu = [SlotReport(i, rng.normal(size=40)) for i in range(10_000)]
    att = [SlotReport(i, rng.normal(size=40), Source.ATTACKER) for i in range(1000)]
    train = build_dataset(pu, PU_LABEL)
    assert len(train) == 10_000 and np.all(train.labels == 1)
    test = train.concat(build_dataset(att, ATTACK_LABEL))
    assert len(test) == 11_000
    assert np.sum(test.labels == -1) == 1000
    assert np.array_equal(train.X[5], summarize_slot(pu[5]).as_array())
    with pytest.raises(DatasetError):
        build_dataset([], PU_LABEL)
    with pytest.raises(DatasetError, match="disagree"):
        build_dataset([SlotReport(0, np.zeros(3)), SlotReport(1, np.zeros(4))], PU_LABEL)
    with pytest.raises(DatasetError):
        build_dataset(pu[:2], 0)


def test_example_label_invariant():
    with pytest.raises(ValueError):
        Example(FeatureVector(0, 0, 0, 0, 0), 0)


def test_dataset_is_read_only():
    ds = dataset_from_energies(np.random.default_rng(0).normal(size=(5, 4)), PU_LABEL)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.just(5)),
              elements=st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False, allow_subnormal=True)),
       st.lists(st.sampled_from([1, -1]), min_size=20, max_size=20))
def test_csv_round_trip_identity(tmp_path_factory, X, labels):
    ds = Dataset(np.arange(len(X)) * 3, X, labels[: len(X)])
    path = tmp_path_factory.mktemp("csv") / "d.csv"
    write_csv(ds, path)
    back = read_csv(path)
    assert back == ds
    assert back.X.tobytes() == ds.X.tobytes()  # bit-exact, including -0.0


def test_csv_format(tmp_path):
    ds = Dataset([0, 1], [[1.0, 0.1, 2, 3, 4], [-1.5, 0, 0, 0, 0]], [1, -1])
    p = tmp_path / "d.csv"
    write_csv(ds, p)
    raw = p.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) == "slot_id,mean_db,var_db,median_db,uq_db,lq_db,label"
    assert lines[1] == "0,1,0.10000000000000001,2,3,4,1"
    assert lines[2].endswith(",-1")


def test_csv_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(",".join(CSV_HEADER) + "\n0,1,2,3,4,5,1\n1,1,2,3,4,5,0\n")
    with pytest.raises(DatasetError, match=r"bad\.csv:3: label"):
        read_csv(p)
    p.write_text(",".join(CSV_HEADER) + "\n0,1,2,3,4,1\n")
    with pytest.raises(DatasetError, match=r":2: expected 7 columns"):
        read_csv(p)
    p.write_text(",".join(CSV_HEADER) + "\n0,1,2,x,4,5,1\n")
    with pytest.raises(DatasetError, match=r":2:"):
        read_csv(p)
    p.write_text("a,b\n")
    with pytest.raises(DatasetError, match=":1:"):
        read_csv(p)


def test_header_only_file_is_empty_for_fit(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text(",".join(CSV_HEADER) + "\n")
    ds = read_csv(p)
    assert len(ds) == 0
    with pytest.raises(DatasetError, match="empty"):
        ds.require_nonempty()
