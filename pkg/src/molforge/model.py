"""End-to-end architecture: multimodal encoder, causal backbone,
cross-attention data decoder, and the autoregressive text head.

Two decoding pathways share one prompt encoding:
  * operator path -- query points (t, x) are embedded by an MLP and
    cross-attend to the prompt hidden states; queries never see each other,
    so each evaluation is independent of the rest;
  * text path -- next-token prediction with a head weight-tied to the
    token embedding table, decoded greedily at inference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import PATCH_WIDTH, get_equation
from .errors import SequenceTooLong
from .nn import (CrossAttentionLayer, Linear, MLP, Module, SineMLP,
                 TransformerLayer,
                 causal_mask, parameter)
from .nn.tensor import Tensor
from .tokenizer import (EOS, MAX_SEQ_LEN, NUM, SEP_TEXT_START, Segment,
                        TokenSequence, Vocab)

D_MAX = 3


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 128
    heads: int = 4
    backbone_layers: int = 4
    decoder_layers: int = 2
    ffn_ratio: int = 4
    patch_width: int = PATCH_WIDTH
    query_dim: int = 2               # (t, x); x = 0 for ODEs
    out_channels: int = D_MAX
    max_seq_len: int = MAX_SEQ_LEN

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class GeneratedText:
    ids: np.ndarray
    hit_max_len: bool


class OperatorModel(Module):
    def __init__(self, config: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        c = config
        self.config = c
        self.token_embedding = parameter((c.vocab_size, c.d_model), rng)
        self.position_embedding = parameter((c.max_seq_len, c.d_model), rng)
        self.numeric_encoder = MLP(c.patch_width, c.d_model, rng)
        self.backbone = [TransformerLayer(c.d_model, c.heads, rng, c.ffn_ratio)
                         for _ in range(c.backbone_layers)]
        # sine hidden activation: raw (t, x) coordinates through a smooth
        # MLP underfit oscillatory fields (spectral bias)
        self.query_encoder = SineMLP(c.query_dim, c.d_model, rng)
        self.data_decoder = [CrossAttentionLayer(c.d_model, c.heads, rng,
                                                 c.ffn_ratio)
                             for _ in range(c.decoder_layers)]
        # zero-init so the untrained operator output starts at exactly 0
        self.output_head = Linear(c.d_model, c.out_channels, rng, zero_init=True)
        # text head is weight-tied to the embedding table (bias only here)
        self.text_bias = parameter(np.zeros(c.vocab_size))

    # -- encoding --------------------------------------------------------
    def _embed_tokens(self, seq: TokenSequence) -> Tensor:
        n = len(seq)
        if n > self.config.max_seq_len:
            raise SequenceTooLong(f"{n} tokens > {self.config.max_seq_len}")
        emb = self.token_embedding.embedding(seq.ids)
        if seq.numeric_payloads:
            patches = np.stack([p for _, p in seq.numeric_payloads])
            positions = np.array([i for i, _ in seq.numeric_payloads])
            num_emb = self.numeric_encoder(Tensor(patches))
            # scatter the MLP embeddings into the NUM positions
            hot = np.zeros((n, positions.shape[0]))
            hot[positions, np.arange(positions.shape[0])] = 1.0
            emb = emb * Tensor((seq.ids != NUM)[:, None].astype(float)) \
                + Tensor(hot) @ num_emb
        return emb + self.position_embedding[:n]

    def encode_sequence(self, seq: TokenSequence) -> Tensor:
        """Causal backbone over the full sequence; returns [n, d] states."""
        h = self._embed_tokens(seq)
        mask = causal_mask(len(seq))
        for layer in self.backbone:
            h = layer(h, mask)
        return h

    # -- operator pathway ------------------------------------------------
    def normalize_queries(self, family_index: int,
                          queries: np.ndarray) -> np.ndarray:
        """Scale (t, x) to the unit square using the family's extents."""
        spec = get_equation(family_index)
        q = np.asarray(queries, dtype=np.float64).copy()
        q[:, 0] /= spec.time_horizon
        if not spec.is_ode:
            q[:, 1] /= spec.domain_length
        return q

    def evaluate_operator(self, hidden: Tensor, queries: np.ndarray,
                          prompt_mask: np.ndarray | None = None) -> Tensor:
        """Evaluate the solution operator at normalized query points.

        ``hidden`` are backbone states; ``prompt_mask`` (True = blocked)
        hides non-prompt positions so text targets cannot leak into the
        numeric pathway.
        """
        q = self.query_encoder(Tensor(np.asarray(queries, dtype=np.float64)))
        mask = None
        if prompt_mask is not None:
            mask = np.broadcast_to(prompt_mask[None, :],
                                   (q.shape[0], hidden.shape[0]))
        for layer in self.data_decoder:
            q = layer(q, hidden, mask)
        return self.output_head(q)

    # -- text pathway ----------------------------------------------------
    def text_logits(self, hidden: Tensor) -> Tensor:
        return hidden @ self.token_embedding.transpose() + self.text_bias

    def generate_text(self, seq_prompt: TokenSequence, vocab: Vocab,
                      max_len: int = 64) -> GeneratedText:
        """Greedy decode after SEP_TEXT_START; ties break to lowest id."""
        ids = list(seq_prompt.ids)
        payloads = list(seq_prompt.numeric_payloads)
        out: list[int] = []
        hit_max = True
        for _ in range(max_len):
            seq = TokenSequence(ids=np.asarray(ids + out, dtype=np.int64),
                                numeric_payloads=payloads,
                                segments=np.zeros(len(ids) + len(out),
                                                  dtype=np.int64))
            h = self.encode_sequence(seq)
            logits = self.text_logits(h[-1]).data
            nxt = int(np.argmax(logits))     # np.argmax takes the first max
            if nxt == EOS:
                hit_max = False
                break
            out.append(nxt)
        return GeneratedText(ids=np.asarray(out, dtype=np.int64),
                             hit_max_len=hit_max)

    # -- joint training pass ---------------------------------------------
    def forward_train(self, seq: TokenSequence,
                      queries: np.ndarray) -> tuple[Tensor, Tensor, np.ndarray]:
        """One causal pass; returns (numeric preds, text logits, targets).

        Text logits are read at every position whose *next* token lies in
        the text-target segment (so SEP predicts the first text token);
        numeric predictions cross-attend to prompt positions only.
        """
        hidden = self.encode_sequence(seq)
        prompt = seq.segments == Segment.PROMPT.value
        numeric = self.evaluate_operator(hidden, queries, prompt_mask=~prompt)
        predict_from = np.flatnonzero(~prompt[1:])      # positions i with i+1 in text
        logits = self.text_logits(hidden[predict_from])
        targets = seq.ids[predict_from + 1]
        return numeric, logits, targets


def build_model(vocab: Vocab, seed: int = 0, **overrides) -> OperatorModel:
    cfg = ModelConfig(vocab_size=vocab.size, **overrides)
    return OperatorModel(cfg, seed=seed)
