import numpy as np
import pytest

import seq2seq.backprop as backprop
from numcore.params import backward
from seq2seq.backprop import BatchGraph, total_loss
from seq2seq.train import model_grad_check

TOLERANCE = 1e-4
# entries whose gradient is this small are dominated by finite-difference noise
ABS_FLOOR = 1e-8


def worst_error(records):
    bad = [r["rel_error"] for r in records if abs(r["analytic"] - r["numeric"]) >= ABS_FLOOR]
    return max(bad, default=0.0)


@pytest.mark.parametrize("mode", ["ag", "baseline"])
def test_full_gradient_matches_finite_differences(mode, request, composed_example, atomic_example, rng):
    model = request.getfixturevalue(f"{mode}_model")
    _, records = model_grad_check(model, [composed_example, atomic_example], rng, samples=300)
    assert len(records) == 300
    assert worst_error(records) < TOLERANCE


def test_attention_loss_gradient_with_heavy_weight(ag_model, composed_example, rng):
    _, records = model_grad_check(ag_model, [composed_example], rng, ag_weight=5.0, samples=300)
    assert worst_error(records) < TOLERANCE


def test_transposed_recurrent_weight_is_caught(monkeypatch, ag_model, composed_example, rng):
    original = backprop.gru_backward

    def transposed(cell, cache, dh):
        W = cell.W_hh.value
        cell.W_hh.value = W.T.copy()
        try:
            return original(cell, cache, dh)
        finally:
            cell.W_hh.value = W

    monkeypatch.setattr(backprop, "gru_backward", transposed)
    # enough samples to cover every entry of the tiny model
    err, records = model_grad_check(ag_model, [composed_example], rng, samples=5000)
    assert len(records) == sum(p.value.size for p in ag_model.named_parameters().values())
    assert err > 1e-2


def test_frozen_parameters_get_no_gradient(ag_model, composed_example):
    ag_model.encoder.W_hh.frozen = True
    backward(BatchGraph(ag_model, [composed_example], 1.0))
    assert not ag_model.encoder.W_hh.grad.any()
    assert ag_model.decoder.W_hh.grad.any()


def test_batch_loss_is_mean_of_examples(ag_model, composed_example, atomic_example):
    graph = BatchGraph(ag_model, [composed_example, atomic_example], 1.0)
    expected = (total_loss(ag_model, composed_example) + total_loss(ag_model, atomic_example)) / 2
    assert graph.loss == pytest.approx(expected)


def test_baseline_ignores_attention_loss(baseline_model, composed_example):
    graph = BatchGraph(baseline_model, [composed_example], 0.0)
    assert graph.loss == pytest.approx(graph.token_loss)
    assert graph.attention_loss > 0
    assert total_loss(baseline_model, composed_example) == pytest.approx(graph.token_loss)


def test_loss_is_finite(ag_model, bundle):
    for ex in bundle.new_compositions[:5]:
        assert np.isfinite(total_loss(ag_model, ex))
