import numpy as np
import pytest

from analysis.render import render_distributions, render_heatmap, render_saturation
from analysis.activations import SaturationStats, activation_distributions
from analysis.traces import capture_traces
from analysis.weights import (
    connectivity_graph,
    export_heatmap,
    gate_polarity_correlation,
    heatmap_grid,
    incidence,
    neuron_strength,
    read_heatmap,
    row_mean_abs,
    top_units,
    write_dot,
)
from numcore.errors import ValidationError


def values(model):
    return {name: p.value for name, p in model.named_parameters().items()}


# ---------------- STRENGTH ---------------- #

@pytest.mark.parametrize("half", ["encoder", "decoder"])
def test_neuron_strength(ag_model, tiny_config, half):
    strengths = neuron_strength(values(ag_model), half)
    assert strengths.shape == (tiny_config.hidden_dim,)
    assert np.all(strengths >= 0)


def test_strength_of_uniform_weights(ag_model):
    tensors = {name: np.full_like(v, -0.5) for name, v in values(ag_model).items()}
    assert np.allclose(neuron_strength(tensors, "encoder"), 0.5)


def test_top_units_count_and_order():
    assert len(top_units(np.arange(512.0), 0.05)) == 26
    assert top_units(np.array([0.1, 0.9, 0.5, 0.9]), 0.5).tolist() == [1, 3]


def test_incidence_covers_biases_on_request():
    plain = incidence("decoder", 8)
    full = incidence("decoder", 8, with_biases=True)
    assert len(full) == len(plain) + 3
    assert ("decoder.attention.W1", 0, 0) in plain
    assert ("decoder.attention.W1", 0, 8) in incidence("encoder", 8)
    with pytest.raises(ValidationError):
        incidence("middle", 8)


def test_gate_polarity_correlation_detects_opposition(rng):
    W = rng.normal(size=(6, 6))
    tensors = {
        "encoder.gru.W_hz": W, "encoder.gru.W_hr": -W,
        "encoder.gru.W_iz": W[:3], "encoder.gru.W_ir": W[:3],
    }
    corr = gate_polarity_correlation(tensors, "encoder")
    assert corr["W_hz~W_hr"] == pytest.approx(-1.0)
    assert corr["W_iz~W_ir"] == pytest.approx(1.0)


# ---------------- HEATMAPS ---------------- #

def test_identity_heatmap_exact(tmp_path):
    path = export_heatmap("encoder.gru.W_hh", {"encoder.gru.W_hh": np.eye(5)}, tmp_path)
    assert path.name == "heatmap_encoder_gru_W_hh.csv"
    grid = read_heatmap(path)
    assert np.array_equal(grid, np.eye(5))
    assert row_mean_abs(grid).tolist() == [0.2] * 5


def test_heatmap_roundtrip_is_lossless(tmp_path, ag_model):
    tensors = values(ag_model)
    for name in ("decoder.gru.W_hz", "decoder.embedding", "encoder.gru.b_h"):
        grid, _, _ = heatmap_grid(name, tensors[name])
        assert np.array_equal(read_heatmap(export_heatmap(name, tensors, tmp_path)), grid)


def test_heatmap_csv_layout(tmp_path, rng):
    W = rng.normal(size=(3, 4))
    path = export_heatmap("decoder.embedding", {"decoder.embedding": W}, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# matrix=decoder.embedding shape=3x4 rows=token cols=embedding unit"
    assert len(lines) == 4 and all(len(line.split(",")) == 4 for line in lines[1:])
    assert [float(v) for v in lines[1].split(",")] == W[0].tolist()


def test_heatmap_orientation(rng):
    W = rng.normal(size=(3, 5))
    grid, rows, _ = heatmap_grid("encoder.gru.W_iz", W)
    assert grid.shape == (5, 3)
    assert rows.startswith("receiving")
    emb, rows, _ = heatmap_grid("decoder.embedding", W)
    assert emb is W and rows == "token"


def test_unknown_heatmap_tensor(tmp_path):
    with pytest.raises(ValidationError):
        export_heatmap("decoder.gru.W_xx", {}, tmp_path)


# ---------------- GRAPHS ---------------- #

def test_zero_matrix_has_no_edges():
    cg = connectivity_graph(np.zeros((4, 4)), 0.1)
    assert cg.n_edges == 0
    assert cg.degree_stats()["source_hubs"] == []


def test_zero_threshold_is_complete(rng):
    cg = connectivity_graph(rng.normal(size=(3, 4)), 0.0)
    assert cg.n_edges == 12
    assert cg.kept_fraction == 1.0
    assert cg.degree_stats()["max_out_degree"] == 4


def test_edges_shrink_with_threshold(rng):
    W = rng.normal(size=(8, 8))
    counts = [connectivity_graph(W, t).n_edges for t in (0.0, 0.5, 1.0, 1.5, 3.0)]
    assert counts == sorted(counts, reverse=True)


def test_edge_attributes():
    cg = connectivity_graph(np.array([[0.5, -0.3], [0.0, 0.01]]), 0.2)
    assert cg.n_edges == 2
    assert cg.graph.edges["in0", "out1"]["sign"] == "neg"
    assert cg.graph.edges["in0", "out0"]["magnitude"] == 0.5


def test_negative_threshold_rejected():
    with pytest.raises(ValidationError):
        connectivity_graph(np.eye(2), -0.1)


def test_dot_output(tmp_path):
    cg = connectivity_graph(np.array([[0.5, -0.3], [0.0, 0.01]]), 0.2, name="decoder.gru.W_hh")
    text = write_dot(cg, tmp_path / "g.dot").read_text()
    assert text.startswith("digraph")
    assert "in0" in text and "out1" in text
    assert "decoder_gru_W_hh" in text


# ---------------- RENDERING ---------------- #

def test_heatmap_svg_is_deterministic(tmp_path, rng):
    grid = rng.normal(size=(6, 4))
    a = render_heatmap(grid, tmp_path / "a.svg", title="W")
    b = render_heatmap(grid, tmp_path / "b.svg", title="W")
    assert a.read_bytes() == b.read_bytes()
    assert b"<svg" in a.read_bytes()


def test_other_plots_render(tmp_path, ag_model, bundle, rng):
    traces = capture_traces(ag_model, bundle.new_compositions[:3])
    summary = activation_distributions(traces, rng, k=4)
    stats = SaturationStats("dec_z", np.array([0.1, 0.0]), np.array([0.5, 0.9]), 10)
    assert render_distributions(summary, tmp_path / "d.svg").stat().st_size > 0
    assert render_saturation(stats, tmp_path / "s.svg").stat().st_size > 0
