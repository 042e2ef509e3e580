# seq2seq/model.py
import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from numcore.errors import ConfigError, ShapeError
from numcore.matrix import Rng, softmax
from numcore.params import Parameter
from seq2seq.attention import AttentionCache, AttentionScorer, attend, encoder_projection
from seq2seq.config import MODES, ModelConfig
from seq2seq.gru import SLOTS, GruCache, GruCell, gru_step
from taskgen.tables import TaskError
from taskgen.vocab import EOS, SOS, Vocabulary


@dataclass
class Seq2SeqModel:
    """
    GRU encoder-decoder with MLP attention.

    The context vector enters at the output projection only:
    p(y_t) = softmax([s_t; c_t] W_out + b_out).
    """
    config: ModelConfig
    vocab: Vocabulary
    mode: str
    enc_embedding: Parameter
    encoder: GruCell
    dec_embedding: Parameter
    decoder: GruCell
    attention: AttentionScorer
    out_weight: Parameter
    out_bias: Parameter

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    def named_parameters(self) -> Dict[str, Parameter]:
        params = {"encoder.embedding": self.enc_embedding}
        params.update({f"encoder.gru.{k}": p for k, p in self.encoder.parameters().items()})
        params["decoder.embedding"] = self.dec_embedding
        params.update({f"decoder.gru.{k}": p for k, p in self.decoder.parameters().items()})
        params.update({f"decoder.attention.{k}": p for k, p in self.attention.parameters().items()})
        params["decoder.out_proj.weight"] = self.out_weight
        params["decoder.out_proj.bias"] = self.out_bias
        return params

    def predict(self, tokens: Sequence[str]) -> List[str]:
        return greedy_decode(self, tokens)

    def copy(self) -> "Seq2SeqModel":
        return copy.deepcopy(self)


def tensor_names() -> List[str]:
    """Checkpoint tensor names, in manifest order."""
    names = ["encoder.embedding"]
    names += [f"encoder.gru.{s}" for s in SLOTS]
    names.append("decoder.embedding")
    names += [f"decoder.gru.{s}" for s in SLOTS]
    names += ["decoder.attention.W1", "decoder.attention.b1", "decoder.attention.w2"]
    names += ["decoder.out_proj.weight", "decoder.out_proj.bias"]
    return names


def init_model(config: ModelConfig, vocab: Vocabulary, mode: str, rng: Rng) -> Seq2SeqModel:
    """uniform(-scale, scale) weights, zero biases."""
    s, e, h = config.init_scale, config.embed_dim, config.hidden_dim
    return Seq2SeqModel(
        config=config,
        vocab=vocab,
        mode=mode,
        enc_embedding=Parameter(rng.uniform(-s, s, size=(len(vocab.encoder), e))),
        encoder=GruCell.init(e, h, rng, s),
        dec_embedding=Parameter(rng.uniform(-s, s, size=(len(vocab.decoder), e))),
        decoder=GruCell.init(e, h, rng, s),
        attention=AttentionScorer.init(h, h, config.attn_dim, rng, s),
        out_weight=Parameter(rng.uniform(-s, s, size=(2 * h, len(vocab.decoder)))),
        out_bias=Parameter(np.zeros(len(vocab.decoder))),
    )


# ============================================================
# Forward pass
# ============================================================
@dataclass
class EncoderRun:
    tokens: List[int]
    caches: List[GruCache]
    states: np.ndarray          # N x hidden
    projection: np.ndarray      # N x attn, encoder half of the scorer


@dataclass
class DecodeStep:
    prev_token: int
    gru: GruCache
    attn: AttentionCache
    features: np.ndarray        # [s_t; c_t]
    probs: np.ndarray

    @property
    def state(self) -> np.ndarray:
        return self.gru.h


def encode(model: Seq2SeqModel, tokens: Sequence[str]) -> EncoderRun:
    ids = model.vocab.encode_input(tokens)
    if not ids:
        raise TaskError("cannot encode an empty input")
    h = np.zeros(model.config.hidden_dim)
    caches = []
    for i in ids:
        cache = gru_step(model.encoder, model.enc_embedding.value[i], h)
        caches.append(cache)
        h = cache.h
    states = np.stack([c.h for c in caches])
    return EncoderRun(ids, caches, states, encoder_projection(model.attention, states))


def decode_step(model: Seq2SeqModel, prev_token: int, s_prev: np.ndarray, enc: EncoderRun) -> DecodeStep:
    if not 0 <= prev_token < len(model.vocab.decoder):
        raise TaskError(f"unknown decoder token id {prev_token}")
    if s_prev.shape != (model.config.hidden_dim,):
        raise ShapeError("decode_step state", s_prev.shape, (model.config.hidden_dim,))

    gru = gru_step(model.decoder, model.dec_embedding.value[prev_token], s_prev)
    attn = attend(model.attention, gru.h, enc.states, enc.projection)
    features = np.concatenate([gru.h, attn.context])
    probs = softmax(features @ model.out_weight.value + model.out_bias.value)
    return DecodeStep(prev_token, gru, attn, features, probs)


@dataclass
class InferenceRun:
    encoder: EncoderRun
    steps: List[DecodeStep] = field(default_factory=list)
    tokens: List[str] = field(default_factory=list)


def run_inference(model: Seq2SeqModel, tokens: Sequence[str],
                  n_steps: Optional[int] = None, max_steps: Optional[int] = None) -> InferenceRun:
    """
    Greedy decoding.

    With n_steps the decoder runs exactly that many steps (used for tracing);
    otherwise it stops at EOS or after max_steps (default: input length + 2).
    """
    enc = encode(model, tokens)
    run = InferenceRun(enc)
    limit = n_steps if n_steps is not None else (max_steps or len(tokens) + 2)
    sos, eos = model.vocab.decoder_index[SOS], model.vocab.decoder_index[EOS]

    prev, s = sos, enc.states[-1]
    for _ in range(limit):
        step = decode_step(model, prev, s, enc)
        run.steps.append(step)
        prev, s = int(np.argmax(step.probs)), step.state
        if n_steps is None and prev == eos:
            break
        run.tokens.append(model.vocab.decoder[prev])
    return run


def greedy_decode(model: Seq2SeqModel, tokens: Sequence[str]) -> List[str]:
    """Output tokens before EOS."""
    return run_inference(model, tokens).tokens
