# seq2seq/backprop.py
"""
Teacher-forced forward pass over one example, recorded for
backpropagation through time.
"""
import logging
from typing import List

import numpy as np

from numcore.matrix import Diagnostics
from numcore.params import LossGraph
from seq2seq.attention import attend_backward
from seq2seq.gru import gru_backward
from seq2seq.losses import ag_loss, attention_targets, token_nll
from seq2seq.model import DecodeStep, EncoderRun, Seq2SeqModel, decode_step, encode
from taskgen.splits import Example
from taskgen.vocab import SOS

logger = logging.getLogger(__name__)


class ExampleGraph(LossGraph):
    """
    loss = token NLL averaged over decoder steps + ag_weight * attention loss
    """

    def __init__(self, model: Seq2SeqModel, example: Example, ag_weight: float,
                 diagnostics: Diagnostics | None = None):
        super().__init__(model.named_parameters())
        self.model = model
        self.ag_weight = ag_weight
        self.diagnostics = diagnostics if diagnostics is not None else Diagnostics()

        vocab = model.vocab
        self.targets = vocab.encode_output(example.target)
        self.enc: EncoderRun = encode(model, example.input)
        self.attn_targets = attention_targets(example.attention, len(example.input))

        inputs = [vocab.decoder_index[SOS]] + self.targets[:-1]
        self.steps: List[DecodeStep] = []
        s = self.enc.states[-1]
        for prev in inputs:
            step = decode_step(model, prev, s, self.enc)
            self.steps.append(step)
            s = step.state

        hits_before = self.diagnostics.floor_hits
        self.token_loss = token_nll([st.probs for st in self.steps], self.targets, self.diagnostics)
        attn = np.stack([st.attn.weights for st in self.steps])
        self.attention_loss = ag_loss(attn, self.attn_targets, self.diagnostics)
        if self.diagnostics.floor_hits > hits_before:
            logger.warning("probability floor hit %d time(s) on %s",
                           self.diagnostics.floor_hits - hits_before, " ".join(example.input))

        self.loss = self.token_loss + ag_weight * self.attention_loss
        self.mark_recorded()

    def _backprop(self):
        m = self.model
        hidden = m.config.hidden_dim
        T = len(self.steps)

        dH = np.zeros_like(self.enc.states)
        ds_next = np.zeros(hidden)
        for t in reversed(range(T)):
            step = self.steps[t]

            dlogits = step.probs.copy()
            dlogits[self.targets[t]] -= 1.0
            dlogits /= T
            m.out_weight.grad += np.outer(step.features, dlogits)
            m.out_bias.grad += dlogits

            dfeat = m.out_weight.value @ dlogits
            ds = dfeat[:hidden] + ds_next

            extra = None
            if self.ag_weight:
                extra = (self.ag_weight / T) * (step.attn.weights - self.attn_targets[t])
            ds_attn, dH_step = attend_backward(m.attention, step.attn, dfeat[hidden:], extra)
            ds += ds_attn
            dH += dH_step

            dx, ds_next = gru_backward(m.decoder, step.gru, ds)
            m.dec_embedding.grad[step.prev_token] += dx

        # decoder starts from the last encoder state
        dH[-1] += ds_next

        dh_next = np.zeros(hidden)
        for i in reversed(range(len(self.enc.caches))):
            dx, dh_next = gru_backward(m.encoder, self.enc.caches[i], dH[i] + dh_next)
            m.enc_embedding.grad[self.enc.tokens[i]] += dx


def forward_example(model: Seq2SeqModel, example: Example, ag_weight: float,
                    diagnostics: Diagnostics | None = None) -> ExampleGraph:
    return ExampleGraph(model, example, ag_weight, diagnostics)


def total_loss(model: Seq2SeqModel, example: Example, ag_weight: float | None = None) -> float:
    """Token NLL + weight * attention loss; the weight defaults to 1 in AG mode, 0 in baseline."""
    if ag_weight is None:
        ag_weight = 1.0 if model.mode == "ag" else 0.0
    return forward_example(model, example, ag_weight).loss


class BatchGraph(LossGraph):
    """Mean loss over a batch of examples."""

    def __init__(self, model: Seq2SeqModel, examples: List[Example], ag_weight: float,
                 diagnostics: Diagnostics | None = None):
        super().__init__(model.named_parameters())
        self.graphs = [ExampleGraph(model, ex, ag_weight, diagnostics) for ex in examples]
        n = max(len(self.graphs), 1)
        self.loss = sum(g.loss for g in self.graphs) / n
        self.token_loss = sum(g.token_loss for g in self.graphs) / n
        self.attention_loss = sum(g.attention_loss for g in self.graphs) / n
        self.mark_recorded()

    def _backprop(self):
        for g in self.graphs:
            g._backprop()
        if len(self.graphs) > 1:
            for p in self.params.values():
                p.grad /= len(self.graphs)
