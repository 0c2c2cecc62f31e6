"""Combined numeric + text objective and the training loop.

Loss: L = alpha * L_n + beta * L_t with
  L_n = mean over batch of ||u - u_hat||^2 / ||u||^2 restricted to valid
        (query, channel) entries; samples with ||u||^2 < 1e-12 are skipped
        and logged rather than regularized, keeping the formula exact;
  L_t = mean cross-entropy over non-pad next-token positions.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import MultimodalSample, load_samples
from .errors import DegenerateTarget, NonFinite
from .model import OperatorModel, build_model
from .nn import Adam, clip_grad_norm, save_checkpoint
from .nn.tensor import Tensor
from .tokenizer import PAD, SentenceWithSlots, TokenSequence, Vocab, \
    encode_multimodal

DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 1.0
    beta: float = 1.0
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0
    batch_size: int = 8
    steps: int = 1000
    seed: int = 0
    query_subsample: int = 256       # per PDE sample per step; 0 = full grid
    checkpoint_every: int = 500
    warmup_steps: int = 0            # optional linear warmup, off by default
    lr_schedule: str = "constant"    # "constant" or "cosine" (to zero)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or (self.alpha == 0 and self.beta == 0):
            raise ValueError("alpha, beta must be >= 0 and not both zero")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    @classmethod
    def from_json(cls, path: str) -> "TrainingConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(**json.load(fh))


def numeric_loss(pred: Tensor, target: np.ndarray,
                 valid: np.ndarray) -> Tensor:
    """Relative squared error of one sample over the valid entries."""
    target = np.asarray(target, dtype=np.float64)
    denom = float(np.sum((target * valid) ** 2))
    if denom < DEGENERATE_NORM:
        raise DegenerateTarget(f"target norm^2 {denom:.3e} below {DEGENERATE_NORM}")
    diff = (pred - Tensor(target)) * Tensor(valid.astype(float))
    return (diff * diff).sum() * (1.0 / denom)


def text_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean cross-entropy over non-pad target positions."""
    targets = np.asarray(targets, dtype=np.int64)
    keep = targets != PAD
    if not np.any(keep):
        warnings.warn("text_loss: every target position is padding")
        return Tensor(0.0)
    logp = logits.log_softmax(axis=-1)
    rows = np.flatnonzero(keep)
    picked = logp[rows, targets[rows]]
    return -picked.mean()


def total_loss(numeric: Tensor, text: Tensor, alpha: float,
               beta: float) -> Tensor:
    return numeric * alpha + text * beta


def sample_to_sequence(sample: MultimodalSample, vocab: Vocab) -> TokenSequence:
    n_coeff = int(sample.params.size)
    n_num = sample.sentence_text.split().count("<num>")
    sent = SentenceWithSlots(text=sample.sentence_text,
                             n_coeff_slots=n_coeff,
                             n_ic_slots=n_num - n_coeff)
    return encode_multimodal(sent, sample.params, sample.ic_values,
                             sample.description, vocab)


def _subsample_queries(sample: MultimodalSample, n: int, rng):
    if n <= 0 or sample.queries.shape[0] <= n:
        return sample.queries, sample.targets
    pick = rng.choice(sample.queries.shape[0], size=n, replace=False)
    return sample.queries[pick], sample.targets[pick]


def step_batch(model: OperatorModel, batch: list[MultimodalSample],
               vocab: Vocab, config: TrainingConfig, rng,
               optimizer: Adam | None = None):
    """One gradient-accumulation step over a batch; returns loss parts.

    Gradients are averaged by scaling each per-sample loss by 1/B before
    backward, so the accumulated gradient equals the batch-mean gradient.
    """
    ln_vals, lt_vals, skipped = [], [], 0
    scale = 1.0 / len(batch)
    for sample in batch:
        seq = sample_to_sequence(sample, vocab)
        queries, targets = _subsample_queries(sample, config.query_subsample,
                                              rng)
        norm_q = model.normalize_queries(sample.family_index, queries)
        pred, logits, tgt_ids = model.forward_train(seq, norm_q)
        valid = np.broadcast_to(sample.channel_mask, targets.shape)
        try:
            ln = numeric_loss(pred, targets, valid)
        except DegenerateTarget:
            skipped += 1
            continue
        lt = text_loss(logits, tgt_ids)
        loss = total_loss(ln, lt, config.alpha, config.beta) * scale
        if not np.isfinite(loss.data):
            raise NonFinite(f"non-finite loss on family {sample.family_index}")
        if optimizer is not None:
            loss.backward()
        ln_vals.append(float(ln.data))
        lt_vals.append(float(lt.data))
    if optimizer is not None:
        clip_grad_norm(model.parameters(), config.grad_clip)
        optimizer.step()
        optimizer.zero_grad()
    return (float(np.mean(ln_vals)) if ln_vals else 0.0,
            float(np.mean(lt_vals)) if lt_vals else 0.0, skipped)


def _scheduled_lr(config: TrainingConfig, step: int) -> float:
    if config.warmup_steps and step <= config.warmup_steps:
        return config.learning_rate * step / config.warmup_steps
    if config.lr_schedule == "cosine":
        span = max(config.steps - config.warmup_steps, 1)
        progress = (step - config.warmup_steps) / span
        return config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * progress))
    return config.learning_rate


@dataclass
class TrainResult:
    metrics_path: str
    checkpoint_path: str
    final_numeric_loss: float
    final_text_loss: float
    steps: int
    skipped_degenerate: int


def train(samples: list[MultimodalSample], model: OperatorModel, vocab: Vocab,
          config: TrainingConfig, out_dir: str,
          eval_samples: list[MultimodalSample] | None = None) -> TrainResult:
    """Seeded-shuffle mini-batch training with CSV metric logging."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model.parameters(), lr=config.learning_rate,
                     beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    metrics_path = out / "metrics.csv"
    ckpt_path = out / "checkpoint"
    order = np.arange(len(samples))
    pos = len(order)                  # force an initial shuffle
    total_skipped = 0
    ln = lt = 0.0
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "numeric_loss", "text_loss", "total_loss",
                         "heldout_rel_err", "seconds"])
        t0 = time.time()
        for step in range(1, config.steps + 1):
            if pos + config.batch_size > len(order):
                rng.shuffle(order)
                pos = 0
            batch = [samples[i] for i in order[pos:pos + config.batch_size]]
            pos += config.batch_size
            optimizer.lr = _scheduled_lr(config, step)
            ln, lt, skipped = step_batch(model, batch, vocab, config, rng,
                                         optimizer)
            total_skipped += skipped
            heldout = ""
            if eval_samples and (step % config.checkpoint_every == 0
                                 or step == config.steps):
                heldout = f"{heldout_relative_error(model, eval_samples, vocab):.6f}"
            writer.writerow([step, f"{ln:.6f}", f"{lt:.6f}",
                             f"{config.alpha * ln + config.beta * lt:.6f}",
                             heldout, f"{time.time() - t0:.2f}"])
            if step % config.checkpoint_every == 0 or step == config.steps:
                save_checkpoint(model, str(ckpt_path),
                                extra={"step": step,
                                       "config_hash": model.config.config_hash()})
    return TrainResult(metrics_path=str(metrics_path),
                       checkpoint_path=str(ckpt_path),
                       final_numeric_loss=ln, final_text_loss=lt,
                       steps=config.steps, skipped_degenerate=total_skipped)


def predict_numeric(model: OperatorModel, sample: MultimodalSample,
                    vocab: Vocab) -> np.ndarray:
    """Operator prediction on the sample's full query grid, prompt-only."""
    seq = sample_to_sequence(sample, vocab)
    hidden = model.encode_sequence(seq)
    prompt = seq.segments == 0
    norm_q = model.normalize_queries(sample.family_index, sample.queries)
    pred = model.evaluate_operator(hidden, norm_q, prompt_mask=~prompt)
    return np.asarray(pred.data, dtype=np.float64)


def heldout_relative_error(model: OperatorModel,
                           samples: list[MultimodalSample],
                           vocab: Vocab) -> float:
    """Mean relative error on full query grids (no subsampling)."""
    from .evaluation import relative_error
    errs = []
    for sample in samples:
        pred = predict_numeric(model, sample, vocab)
        mask = sample.channel_mask
        errs.append(relative_error(sample.targets[:, mask], pred[:, mask]))
    return float(np.mean(errs))
