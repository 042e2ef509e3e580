import math

import numpy as np
import pytest

from numcore.errors import ConfigError, ShapeError
from numcore.params import Parameter
from seq2seq.attention import AttentionScorer, attend
from seq2seq.config import ModelConfig, TrainingConfig
from seq2seq.gru import GruCell, gru_step
from seq2seq.losses import ag_loss, attention_targets, token_nll
from seq2seq.model import encode, run_inference, tensor_names
from taskgen.tables import TaskError


def zero_cell(input_dim=3, hidden_dim=4):
    cell = GruCell.init(input_dim, hidden_dim, np.random.default_rng(0), scale=0.0)
    for p in cell.parameters().values():
        assert not p.value.any()
    return cell


def test_gru_step_shapes(rng):
    cell = GruCell.init(3, 5, rng)
    cache = gru_step(cell, rng.normal(size=3), np.zeros(5))
    assert cache.h.shape == (5,)
    assert np.all((cache.z > 0) & (cache.z < 1))
    assert np.all((cache.r > 0) & (cache.r < 1))


def test_gru_step_zero_weights():
    cell = zero_cell()
    assert np.array_equal(gru_step(cell, np.ones(3), np.zeros(4)).h, np.zeros(4))
    # z = 0.5, candidate = 0: the state halves
    assert np.allclose(gru_step(cell, np.ones(3), np.ones(4)).h, 0.5)


def test_gru_step_rejects_bad_shapes(rng):
    cell = GruCell.init(3, 5, rng)
    with pytest.raises(ShapeError):
        gru_step(cell, np.zeros(4), np.zeros(5))
    with pytest.raises(ShapeError):
        gru_step(cell, np.zeros(3), np.zeros(6))


def test_closed_update_gate_keeps_state(rng):
    cell = GruCell.init(3, 5, rng, scale=1.0)
    cell.b_z.value[:] = -1000.0
    h_prev = rng.normal(size=5)
    assert np.array_equal(gru_step(cell, rng.normal(size=3), h_prev).h, h_prev)


def scalar_gru(cell, x, h_prev):
    """Unit-by-unit GRU update written out with math."""
    W = {k: p.value for k, p in cell.parameters().items()}
    n_in, n_h = len(x), len(h_prev)

    def pre(w_in, w_h, b, j, h):
        return sum(x[i] * W[w_in][i, j] for i in range(n_in)) + \
            sum(h[k] * W[w_h][k, j] for k in range(n_h)) + W[b][j]

    z = [1 / (1 + math.exp(-pre("W_iz", "W_hz", "b_z", j, h_prev))) for j in range(n_h)]
    r = [1 / (1 + math.exp(-pre("W_ir", "W_hr", "b_r", j, h_prev))) for j in range(n_h)]
    gated = [r[k] * h_prev[k] for k in range(n_h)]
    hh = [math.tanh(pre("W_ih", "W_hh", "b_h", j, gated)) for j in range(n_h)]
    return [(1 - z[j]) * h_prev[j] + z[j] * hh[j] for j in range(n_h)]


def test_gru_step_matches_scalar_update(rng):
    cell = GruCell.init(2, 3, rng, scale=1.0)
    for p in cell.parameters().values():
        p.value[...] = rng.normal(size=p.shape)
    x, h_prev = rng.normal(size=2), rng.normal(size=3)
    assert np.allclose(gru_step(cell, x, h_prev).h, scalar_gru(cell, x, h_prev), rtol=0, atol=1e-12)


def test_gru_state_stays_bounded(rng):
    cell = GruCell.init(3, 6, rng, scale=2.0)
    for _ in range(200):
        h_prev = rng.normal(scale=3.0, size=6)
        h = gru_step(cell, rng.normal(scale=3.0, size=3), h_prev).h
        assert np.abs(h).max() <= max(np.abs(h_prev).max(), 1.0) + 1e-12


def test_encode_states_follow_gru_steps(ag_model, composed_example):
    run = encode(ag_model, composed_example.input)
    assert run.states.shape == (len(composed_example.input), ag_model.config.hidden_dim)
    h = np.zeros(ag_model.config.hidden_dim)
    for i, token_id in enumerate(ag_model.vocab.encode_input(composed_example.input)):
        h = gru_step(ag_model.encoder, ag_model.enc_embedding.value[token_id], h).h
        assert np.array_equal(run.states[i], h)


def test_attend_weights_are_a_distribution(rng):
    scorer = AttentionScorer.init(6, 6, 5, rng, scale=1.0)
    H = rng.normal(size=(3, 6))
    cache = attend(scorer, rng.normal(size=6), H)
    assert cache.weights.shape == (3,)
    assert cache.weights.sum() == pytest.approx(1.0)
    assert np.allclose(cache.context, cache.weights @ H)


def test_attend_zero_scorer_is_uniform(rng):
    scorer = AttentionScorer.init(4, 4, 3, rng, scale=0.0)
    cache = attend(scorer, rng.normal(size=4), rng.normal(size=(4, 4)))
    assert np.allclose(cache.weights, 0.25)


def test_attend_needs_encoder_states(rng):
    scorer = AttentionScorer.init(4, 4, 3, rng)
    with pytest.raises(ShapeError):
        attend(scorer, np.zeros(4), np.zeros((0, 4)))


def test_ag_loss_zero_on_matching_one_hot():
    targets = attention_targets([0, 1, 2, 2], 3)
    assert ag_loss(targets.copy(), targets) == 0.0


def test_ag_loss_uniform_prediction():
    targets = attention_targets([0, 1, 2], 3)
    assert ag_loss(np.full((3, 3), 1 / 3), targets) == pytest.approx(np.log(3))


def test_token_nll_mean_over_steps():
    probs = [np.array([0.5, 0.5]), np.array([0.25, 0.75])]
    assert token_nll(probs, [0, 1]) == pytest.approx((np.log(2) - np.log(0.75)) / 2)


def test_model_parameter_names(ag_model, tiny_config):
    params = ag_model.named_parameters()
    assert list(params) == tensor_names()
    assert params["decoder.attention.W1"].shape == (2 * tiny_config.hidden_dim, tiny_config.attn_dim)
    assert params["decoder.out_proj.weight"].shape == (2 * tiny_config.hidden_dim, 11)
    assert params["encoder.embedding"].shape == (16, tiny_config.embed_dim)
    assert not params["encoder.gru.b_z"].value.any()


def test_decode_probabilities_sum_to_one(ag_model, composed_example):
    run = run_inference(ag_model, composed_example.input, n_steps=4)
    assert len(run.steps) == 4
    for step in run.steps:
        assert step.probs.sum() == pytest.approx(1.0)
        assert step.attn.weights.sum() == pytest.approx(1.0)


def test_greedy_decode_stops(ag_model, composed_example):
    out = ag_model.predict(composed_example.input)
    assert len(out) <= len(composed_example.input) + 2


def test_predict_rejects_unknown_tokens(ag_model):
    with pytest.raises(TaskError):
        ag_model.predict(["000", "t9"])
    with pytest.raises(TaskError):
        ag_model.predict([])


def test_copy_is_independent(ag_model):
    clone = ag_model.copy()
    clone.out_bias.value += 1.0
    assert not ag_model.out_bias.value.any()


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(hidden_dim=0)
    with pytest.raises(ConfigError):
        TrainingConfig(epochs=101)
    with pytest.raises(ConfigError):
        TrainingConfig(selection="best")
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"hidden": 3})
    assert TrainingConfig().loss_weight("baseline") == 0.0
    assert TrainingConfig(ag_weight=2.0).loss_weight("ag") == 2.0


def test_parameter_mask_shape():
    with pytest.raises(ShapeError):
        Parameter(np.zeros(3), mask=np.zeros(2))
