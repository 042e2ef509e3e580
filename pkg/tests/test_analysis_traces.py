import numpy as np
import pytest

from analysis.activations import activation_distributions, gate_saturation, narrow_units
from analysis.traces import ARRAYS, ActivationTrace, TraceSet, capture_traces, load_traces, save_traces
from numcore.errors import ValidationError


def constant_trace(value, hidden=4, steps=3):
    full = np.full((steps, hidden), value)
    return ActivationTrace(
        example_id="c", input=("000", "t1", "t2"),
        enc_h=full, enc_z=full, enc_r=full, dec_h=full, dec_z=full, dec_r=full,
        attention=np.full((steps, 3), 1 / 3),
    )


@pytest.fixture
def traces(ag_model, bundle):
    return capture_traces(ag_model, bundle.new_compositions[:4] + bundle.train[:2], prefix="t")


# ---------------- CAPTURE ---------------- #

def test_capture_shapes(traces, tiny_config):
    assert len(traces) == 6
    composed = traces.traces[0]
    assert composed.example_id == "t0"
    assert composed.enc_h.shape == (3, tiny_config.hidden_dim)
    assert composed.dec_h.shape == (4, tiny_config.hidden_dim)
    assert composed.attention.shape == (4, 3)
    atomic = traces.traces[-1]
    assert atomic.enc_h.shape[0] == 2 and atomic.dec_h.shape[0] == 3


def test_gates_strictly_inside_unit_interval(traces):
    for array in ("enc_z", "enc_r", "dec_z", "dec_r"):
        rows = traces.rows(array)
        assert np.all((rows > 0) & (rows < 1))


def test_table_labels(traces, bundle):
    ex = bundle.new_compositions[0]
    trace = traces.traces[0]
    assert trace.enc_tables == [None, ex.input[1], ex.input[2]]
    assert trace.dec_tables == [None, ex.input[1], ex.input[2], None]
    X, y = traces.table_rows("enc_h")
    assert len(X) == len(y) == 4 * 2 + 2 * 1
    X, y = traces.timestep_rows()
    assert y[:3].tolist() == [0, 1, 2]


def test_recapture_is_identical(ag_model, bundle, traces):
    again = capture_traces(ag_model, bundle.new_compositions[:4] + bundle.train[:2], prefix="t")
    for a, b in zip(traces, again):
        for name in ARRAYS:
            assert np.array_equal(getattr(a, name), getattr(b, name))


def test_archive_roundtrip(tmp_path, traces):
    save_traces(traces, tmp_path / "traces")
    loaded = load_traces(tmp_path / "traces")
    assert len(loaded) == len(traces)
    for a, b in zip(traces, loaded):
        assert a.input == b.input and a.output == b.output
        for name in ARRAYS:
            assert np.array_equal(getattr(a, name), getattr(b, name))


def test_missing_archive(tmp_path):
    with pytest.raises(ValidationError):
        load_traces(tmp_path)


# ---------------- ACTIVATIONS ---------------- #

def test_constant_units_have_zero_spread(rng):
    summary = activation_distributions(TraceSet([constant_trace(0.3)]), rng, k=50)
    assert len(summary) == 4
    assert (summary["iqr"] == 0).all() and (summary["range"] == 0).all()
    assert len(narrow_units(summary)) == 4


def test_distribution_columns(traces, rng):
    summary = activation_distributions(traces, rng, array="dec_h", k=5)
    assert list(summary.columns) == ["unit", "min", "q1", "median", "q3", "max", "range", "iqr"]
    assert len(summary) == 5
    assert (summary["min"] <= summary["q1"]).all() and (summary["q3"] <= summary["max"]).all()


@pytest.mark.parametrize("value, left, right", [(0.5, 0.0, 0.0), (0.95, 0.0, 1.0), (0.05, 1.0, 0.0)])
def test_saturation_of_constant_gates(value, left, right):
    stats = gate_saturation(TraceSet([constant_trace(value)]))
    assert np.all(stats.left == left)
    assert np.all(stats.right == right)
    assert stats.observations == 3


def test_saturation_is_invariant_to_duplication():
    trace = constant_trace(0.95)
    trace.dec_z = np.array([[0.95, 0.5], [0.05, 0.95]])
    single = gate_saturation(TraceSet([trace]))
    double = gate_saturation(TraceSet([trace, trace]))
    assert np.array_equal(single.left, double.left)
    assert np.array_equal(single.right, double.right)
    assert single.right_saturated_share() == 1.0
    assert single.to_frame()["right"].tolist() == [0.5, 0.5]


def test_saturation_validation():
    ts = TraceSet([constant_trace(0.5)])
    with pytest.raises(ValidationError):
        gate_saturation(ts, array="enc_h")
    with pytest.raises(ValidationError):
        gate_saturation(ts, lo=0.9, hi=0.1)
