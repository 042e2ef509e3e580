import numpy as np
import pytest

from ablate.components import (
    AblationError,
    ComponentKind,
    component_intact,
    component_tensors,
    extract_component,
    implant,
    substitute_and_retrain,
    swap_cell,
)
from ablate.prune import (
    build_mask,
    load_pruned,
    mask_respected,
    prune_and_evaluate,
    prune_model,
    retrain_pruned,
    save_pruned,
)
from conftest import make_model
from seq2seq.config import ModelConfig, TrainingConfig


def values(model):
    return {n: p.value.copy() for n, p in model.named_parameters().items()}


# ---------------- COMPONENTS ---------------- #

@pytest.mark.parametrize("kind, count", [
    (ComponentKind.ENCODER, 10),
    (ComponentKind.DECODER, 15),
    (ComponentKind.ENCODER_EMBEDDING, 1),
    (ComponentKind.DECODER_WIH, 3),
    (ComponentKind.ENCODER_WHH, 3),
])
def test_component_tensor_counts(kind, count):
    assert len(component_tensors(kind)) == count


def test_recurrent_component_leaves_biases():
    assert component_tensors(ComponentKind.ENCODER_WHH) == [
        "encoder.gru.W_hz", "encoder.gru.W_hr", "encoder.gru.W_hh",
    ]
    assert "decoder.out_proj.bias" in component_tensors(ComponentKind.DECODER)


def test_parse_component_names():
    assert ComponentKind.parse("decoderwhh") is ComponentKind.DECODER_WHH
    assert ComponentKind.parse("ENCODER_EMBEDDING") is ComponentKind.ENCODER_EMBEDDING
    assert ComponentKind.DECODER_WIH.half == "decoder"
    with pytest.raises(AblationError):
        ComponentKind.parse("attention")


def test_implant_copies_and_freezes(ag_model, baseline_model):
    component = extract_component(ag_model, ComponentKind.DECODER_WHH)
    implant(baseline_model, component)
    assert component_intact(baseline_model, component)
    assert baseline_model.decoder.W_hh.frozen
    assert not baseline_model.decoder.b_h.frozen
    component["decoder.gru.W_hh"][0, 0] += 1.0
    assert not component_intact(baseline_model, component)


def test_own_component_is_a_no_op(ag_model):
    before = values(ag_model)
    implant(ag_model, extract_component(ag_model, ComponentKind.ENCODER), freeze=False)
    for name, value in values(ag_model).items():
        assert np.array_equal(value, before[name])


def test_shape_mismatch_rejected(ag_model):
    wide = make_model("baseline", config=ModelConfig(embed_dim=4, hidden_dim=10, attn_dim=6))
    with pytest.raises(AblationError):
        implant(ag_model, extract_component(wide, ComponentKind.DECODER_WHH))
    with pytest.raises(AblationError):
        implant(ag_model, {"decoder.gru.W_xx": np.zeros(3)})


def test_extract_from_checkpoint(checkpoints, ag_model):
    component = extract_component(checkpoints[0], ComponentKind.ENCODER_EMBEDDING)
    assert np.array_equal(component["encoder.embedding"], ag_model.enc_embedding.value)


def test_same_mode_swap_rejected(checkpoints, bundle, quick_training):
    ag, _ = checkpoints
    with pytest.raises(AblationError):
        swap_cell(ag, ag, ComponentKind.DECODER, bundle, quick_training, seed=0)


def test_substitute_and_retrain(checkpoints, bundle):
    ag, baseline = checkpoints
    results = substitute_and_retrain(baseline, ag, ComponentKind.DECODER_WHH, bundle,
                                     epochs=1, lr=0.001, seeds=(0,))
    assert len(results) == 1
    result = results[0]
    assert result.status == "ok"
    assert result.host_mode == "baseline" and result.component == "DecoderWhh"
    assert result.donor_intact
    assert set(result.accuracies) == {"HI", "HC", "HT", "NC"}


# ---------------- PRUNING ---------------- #

def test_keep_everything_is_identity(ag_model):
    pruned, mask = prune_model(ag_model, keep_frac=1.0)
    assert mask.kept_counts() == {"encoder": 8, "decoder": 8}
    before = values(ag_model)
    for name, value in values(pruned).items():
        assert np.array_equal(value, before[name])


def test_pruned_slices_are_zero(ag_model):
    pruned, mask = prune_model(ag_model, keep_frac=0.25)
    assert mask.kept_counts() == {"encoder": 2, "decoder": 2}
    gone = [u for u in range(8) if u not in mask.kept("encoder")]
    assert not pruned.encoder.W_hh.value[:, gone].any()
    assert not pruned.encoder.W_hh.value[gone].any()
    assert not pruned.encoder.b_z.value[gone].any()
    assert not pruned.attention.W1.value[8 + np.array(gone)].any()
    assert mask_respected(pruned, mask)
    # the original stays untouched
    assert ag_model.encoder.W_hh.value[:, gone].any()


def test_mask_follows_given_strengths(ag_model):
    tensors = {n: p.value for n, p in ag_model.named_parameters().items()}
    strengths = {"encoder": np.arange(8.0), "decoder": np.arange(8.0)[::-1]}
    mask = build_mask(tensors, 0.25, strengths)
    assert mask.kept("encoder").tolist() == [6, 7]
    assert mask.kept("decoder").tolist() == [0, 1]


def test_keep_frac_bounds(ag_model):
    with pytest.raises(AblationError):
        prune_model(ag_model, keep_frac=0.0)
    with pytest.raises(AblationError):
        prune_model(ag_model, keep_frac=1.5, force=True)
    pruned, mask = prune_model(ag_model, keep_frac=0.0, force=True)
    assert mask.kept_counts() == {"encoder": 0, "decoder": 0}
    assert not pruned.decoder.W_hz.value.any()


def test_mask_survives_retraining(ag_model, bundle):
    pruned, mask, result = prune_and_evaluate(ag_model, bundle, keep_frac=0.25)
    assert set(result.after_prune) == {"HI", "HC", "HT", "NC"}
    trained, nc, preserved = retrain_pruned(pruned, mask, bundle, TrainingConfig(lr=0.01), epochs=1)
    assert preserved
    assert len(trained.history) == 1
    assert 0.0 <= nc <= 1.0


def test_pruned_checkpoint_roundtrip(tmp_path, ag_model, checkpoints):
    pruned, mask = prune_model(ag_model, keep_frac=0.25)
    path = save_pruned(pruned, mask, tmp_path / "pruned" / "model.json")
    loaded, loaded_mask = load_pruned(path)
    assert loaded_mask.to_dict() == mask.to_dict()
    assert loaded.encoder.W_hh.mask is not None
    assert mask_respected(loaded, loaded_mask)
    with pytest.raises(AblationError):
        load_pruned(checkpoints[0])
