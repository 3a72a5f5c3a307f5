"""Next-character training: truncated BPTT, inverted dropout, Adam.

Gradients are derived by hand and validated against central finite
differences in the test suite; that check is the correctness anchor for
everything else trained here.

Dropout placement: masks sit on the non-recurrent, vertical connections
only -- the hidden vector of layer k feeding layer k+1, and the top hidden
vector feeding the softmax head.  The recurrent h->h path and the one-hot
character input are never masked.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .corpus import ALPHABET_SIZE, CorpusWindow, encode
from .lstm import (
    LstmLayerParams,
    ModelArchitecture,
    ModelCheckpoint,
    sigmoid,
)
from .numeric import RNG_ALGORITHM

PROB_FLOOR = 1e-12
MAX_SEQ_LEN = 80


@dataclass
class TrainConfig:
    dropout_prob: float = 0.0
    seq_len: int = MAX_SEQ_LEN
    batch_size: int = 8
    learning_rate: float = 2e-3
    grad_clip_norm: float = 5.0
    max_steps: int = 2000
    seed: int = 0
    report_every: int = 100
    save_every: int | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob <= 0.3:
            raise ValueError("dropout_prob must lie in [0, 0.3]")
        if not 1 <= self.seq_len <= MAX_SEQ_LEN:
            raise ValueError(f"seq_len must lie in [1, {MAX_SEQ_LEN}]")
        if self.batch_size < 1 or self.max_steps < 1:
            raise ValueError("batch_size and max_steps must be positive")
        if self.learning_rate < 0 or self.grad_clip_norm <= 0:
            raise ValueError("learning_rate must be >= 0 and grad_clip_norm > 0")


@dataclass
class TrainReport:
    """Interval log of one training run."""

    rows: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, step: int, nll_nats: float, grad_norm: float, wall_time_s: float):
        self.rows.append(
            {
                "step": step,
                "nll_nats": nll_nats,
                "nll_bits": nll_nats / np.log(2.0),
                "grad_norm": grad_norm,
                "wall_time_s": wall_time_s,
            }
        )

    @property
    def final_nll(self) -> float:
        return self.rows[-1]["nll_nats"] if self.rows else float("nan")

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows}


def nll_loss(dist: np.ndarray, target: int) -> float:
    """Negative log-likelihood of one character, floored at PROB_FLOOR."""
    dist = np.asarray(dist)
    if not 0 <= int(target) < dist.shape[-1]:
        raise ValueError(f"target {target} outside [0, {dist.shape[-1]})")
    return float(-np.log(max(float(dist[int(target)]), PROB_FLOOR)))


def apply_dropout(h: np.ndarray, mask: np.ndarray, p: float) -> np.ndarray:
    """Inverted dropout: survivors scaled by 1/(1-p) so expectation is kept."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    if p == 0.0:
        return h
    return h * mask / (1.0 - p)


def make_dropout_masks(
    generator: np.random.Generator,
    arch: ModelArchitecture,
    seq_len: int,
    batch_size: int,
    p: float,
) -> list[np.ndarray] | None:
    """Pre-scaled masks, one per vertical connection (layer k up, incl. head).

    Entry k has shape (seq_len, batch_size, H_k) with values 0 or 1/(1-p).
    Returns None at p=0 so the no-dropout path is untouched.
    """
    if p == 0.0:
        return None
    return [
        generator.binomial(1, 1.0 - p, size=(seq_len, batch_size, h)) / (1.0 - p)
        for h in arch.layer_sizes
    ]


def _bptt(
    ckpt: ModelCheckpoint,
    inputs: np.ndarray,
    targets: np.ndarray,
    init_states: list[tuple[np.ndarray, np.ndarray]] | None = None,
    masks: list[np.ndarray] | None = None,
    reduction: str = "mean",
) -> tuple[float, dict[str, np.ndarray], list[tuple[np.ndarray, np.ndarray]]]:
    """Batched forward + backward over a window.

    inputs/targets: (B, T) int arrays.  init_states: per layer (h, c) of
    shape (B, H), zeros when omitted; treated as constants (truncation).
    Returns (loss, grads keyed like checkpoint tensors, final states).
    """
    arch = ckpt.architecture
    B, T = inputs.shape
    if targets.shape != (B, T):
        raise ValueError("inputs and targets must have identical shapes")
    L = arch.num_layers
    sizes = arch.layer_sizes
    if init_states is None:
        init_states = [
            (np.zeros((B, h)), np.zeros((B, h))) for h in sizes
        ]
    if reduction not in ("mean", "sum"):
        raise ValueError("reduction must be 'mean' or 'sum'")
    scale = 1.0 / (B * T) if reduction == "mean" else 1.0

    # Forward, caching activations per layer: gates, cell, tanh(cell), hidden,
    # and the (possibly masked) hidden feeding upward.
    I = [np.empty((T, B, h)) for h in sizes]
    F = [np.empty((T, B, h)) for h in sizes]
    G = [np.empty((T, B, h)) for h in sizes]
    O = [np.empty((T, B, h)) for h in sizes]
    C = [np.empty((T, B, h)) for h in sizes]
    TC = [np.empty((T, B, h)) for h in sizes]
    H = [np.empty((T, B, h)) for h in sizes]
    UP = [np.empty((T, B, h)) for h in sizes]
    probs = np.empty((T, B, arch.output_dim))

    # One-hot layer-0 input contribution for every step at once.
    pre_x0 = ckpt.layers[0].w_x.T[inputs]  # (B, T, 4H0)
    h_prev = [init_states[k][0] for k in range(L)]
    c_prev = [init_states[k][1] for k in range(L)]
    loss = 0.0
    for t in range(T):
        up = None
        for k in range(L):
            layer = ckpt.layers[k]
            hk = sizes[k]
            pre = (pre_x0[:, t, :] if k == 0 else up @ layer.w_x.T) + h_prev[k] @ layer.w_h.T + layer.b
            i = sigmoid(pre[:, :hk])
            f = sigmoid(pre[:, hk : 2 * hk])
            g = np.tanh(pre[:, 2 * hk : 3 * hk])
            o = sigmoid(pre[:, 3 * hk :])
            c = f * c_prev[k] + i * g
            tc = np.tanh(c)
            h = o * tc
            I[k][t], F[k][t], G[k][t], O[k][t] = i, f, g, o
            C[k][t], TC[k][t], H[k][t] = c, tc, h
            up = h if masks is None else h * masks[k][t]
            UP[k][t] = up
            h_prev[k], c_prev[k] = h, c
        logits = up @ ckpt.w_y.T + ckpt.b_y
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        probs[t] = p
        picked = p[np.arange(B), targets[:, t]]
        loss += float(-np.log(np.maximum(picked, PROB_FLOOR)).sum())
    loss *= scale

    # Backward.
    grads = {
        f"layers.{k}.{n}": np.zeros_like(getattr(ckpt.layers[k], n))
        for k in range(L)
        for n in ("w_x", "w_h", "b")
    }
    grads["head.w_y"] = np.zeros_like(ckpt.w_y)
    grads["head.b_y"] = np.zeros_like(ckpt.b_y)

    dh_next = [np.zeros((B, h)) for h in sizes]
    dc_next = [np.zeros((B, h)) for h in sizes]
    w_x0_T_grad = grads["layers.0.w_x"].T  # (D, 4H0) view for scatter-add
    for t in range(T - 1, -1, -1):
        dlogits = probs[t].copy()
        dlogits[np.arange(B), targets[:, t]] -= 1.0
        dlogits *= scale
        grads["head.w_y"] += dlogits.T @ UP[L - 1][t]
        grads["head.b_y"] += dlogits.sum(axis=0)
        dup = dlogits @ ckpt.w_y  # grad wrt masked top hidden
        for k in range(L - 1, -1, -1):
            layer = ckpt.layers[k]
            dmasked = dup if masks is None else dup * masks[k][t]
            dh = dmasked + dh_next[k]
            i, f, g, o = I[k][t], F[k][t], G[k][t], O[k][t]
            tc = TC[k][t]
            dc = dc_next[k] + dh * o * (1.0 - tc * tc)
            da_o = dh * tc * o * (1.0 - o)
            cp = C[k][t - 1] if t > 0 else init_states[k][1]
            da_f = dc * cp * f * (1.0 - f)
            da_i = dc * g * i * (1.0 - i)
            da_g = dc * i * (1.0 - g * g)
            dc_next[k] = dc * f
            da = np.concatenate([da_i, da_f, da_g, da_o], axis=1)  # (B, 4H)
            hp = H[k][t - 1] if t > 0 else init_states[k][0]
            grads[f"layers.{k}.w_h"] += da.T @ hp
            grads[f"layers.{k}.b"] += da.sum(axis=0)
            dh_next[k] = da @ layer.w_h
            if k == 0:
                np.add.at(w_x0_T_grad, inputs[:, t], da)
            else:
                grads[f"layers.{k}.w_x"] += da.T @ UP[k - 1][t]
                dup = da @ layer.w_x  # flows to the masked hidden below
    final_states = [(H[k][T - 1].copy(), C[k][T - 1].copy()) for k in range(L)]
    return loss, grads, final_states


def backward(
    checkpoint: ModelCheckpoint,
    window: CorpusWindow,
    masks: list[np.ndarray] | None = None,
    reduction: str = "mean",
) -> tuple[dict[str, np.ndarray], float]:
    """Gradients and loss for a single window (batch of one).

    ``masks`` entries may be (T, H) or (T, 1, H); pre-scaled as produced by
    :func:`make_dropout_masks`.
    """
    if window.input_indices.size < 1:
        raise ValueError("window must contain at least one character")
    inputs = np.asarray(window.input_indices, dtype=np.int64)[None, :]
    targets = np.asarray(window.target_indices, dtype=np.int64)[None, :]
    if masks is not None:
        masks = [m if m.ndim == 3 else m[:, None, :] for m in masks]
    loss, grads, _ = _bptt(checkpoint, inputs, targets, masks=masks, reduction=reduction)
    return grads, loss


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so the global norm is <= max_norm."""
    total = 0.0
    for name in sorted(grads):
        g = grads[name]
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        for name in sorted(grads):
            grads[name] *= factor
    return norm


def init_checkpoint(
    arch: ModelArchitecture,
    generator: np.random.Generator,
    metadata: dict[str, Any] | None = None,
) -> ModelCheckpoint:
    """Uniform(-s, s) init with s = 1/sqrt(H) per layer; forget bias 1.0."""
    layers = []
    d = arch.input_dim
    for h in arch.layer_sizes:
        s = 1.0 / np.sqrt(h)
        w_x = generator.uniform(-s, s, size=(4 * h, d))
        w_h = generator.uniform(-s, s, size=(4 * h, h))
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0  # forget gate opens by default
        layers.append(LstmLayerParams(w_x=w_x, w_h=w_h, b=b))
        d = h
    s = 1.0 / np.sqrt(arch.layer_sizes[-1])
    w_y = generator.uniform(-s, s, size=(arch.output_dim, arch.layer_sizes[-1]))
    b_y = np.zeros(arch.output_dim)
    return ModelCheckpoint(
        architecture=arch, layers=layers, w_y=w_y, b_y=b_y, metadata=dict(metadata or {})
    )


def _checkpoint_tensors(ckpt: ModelCheckpoint) -> dict[str, np.ndarray]:
    out = {}
    for k, layer in enumerate(ckpt.layers):
        out[f"layers.{k}.w_x"] = layer.w_x
        out[f"layers.{k}.w_h"] = layer.w_h
        out[f"layers.{k}.b"] = layer.b
    out["head.w_y"] = ckpt.w_y
    out["head.b_y"] = ckpt.b_y
    return out


class _Adam:
    def __init__(self, tensors: dict[str, np.ndarray], config: TrainConfig):
        self.cfg = config
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.t = 0

    def update(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        cfg = self.cfg
        self.t += 1
        b1c = 1.0 - cfg.adam_beta1**self.t
        b2c = 1.0 - cfg.adam_beta2**self.t
        for name in sorted(tensors):
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * (g * g)
            tensors[name] -= cfg.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + cfg.adam_eps)


def train(
    text: str,
    arch: ModelArchitecture,
    config: TrainConfig,
    corpus_name: str = "",
    checkpoint_path=None,
) -> tuple[ModelCheckpoint, TrainReport]:
    """Train one model on cleaned text.  Deterministic given config.seed.

    The corpus is split into batch_size contiguous lanes; each lane streams
    non-overlapping windows with recurrent state carried across them and
    reset whenever the lane wraps to its start.
    """
    from . import checkpoint as ckpt_io  # local import, avoids cycle

    indices = encode(text)
    B = config.batch_size
    shard_len = indices.size // B
    if shard_len < 2:
        raise ValueError(
            f"corpus of {indices.size} chars is too small for one window at batch_size={B}"
        )
    T = min(config.seq_len, shard_len - 1)
    windows_per_lane = (shard_len - 1) // T
    lanes = np.stack([indices[b * shard_len : (b + 1) * shard_len] for b in range(B)])

    generator = np.random.Generator(np.random.PCG64(config.seed))
    ckpt = init_checkpoint(
        arch,
        generator,
        metadata={
            "corpus": corpus_name,
            "seed": config.seed,
            "rng_algorithm": RNG_ALGORITHM,
            "dropout_prob": config.dropout_prob,
            "seq_len": T,
        },
    )
    tensors = _checkpoint_tensors(ckpt)
    adam = _Adam(tensors, config)
    report = TrainReport(
        config={
            "arch": list(arch.layer_sizes),
            "rng_algorithm": RNG_ALGORITHM,
            **{k: getattr(config, k) for k in (
                "dropout_prob", "seq_len", "batch_size", "learning_rate",
                "grad_clip_norm", "max_steps", "seed",
            )},
        }
    )

    states = None
    t0 = time.perf_counter()
    interval_nll: list[float] = []
    for step in range(1, config.max_steps + 1):
        w = (step - 1) % windows_per_lane
        if w == 0:
            states = None  # lane wrapped: corpus boundary resets the carry
        start = w * T
        inputs = lanes[:, start : start + T]
        targets = lanes[:, start + 1 : start + T + 1]
        masks = make_dropout_masks(generator, arch, T, B, config.dropout_prob)
        loss, grads, states = _bptt(
            ckpt, inputs, targets, init_states=states, masks=masks, reduction="mean"
        )
        grad_norm = clip_gradients(grads, config.grad_clip_norm)
        adam.update(tensors, grads)
        interval_nll.append(loss)
        if step % config.report_every == 0 or step == config.max_steps:
            report.add(
                step=step,
                nll_nats=float(np.mean(interval_nll)),
                grad_norm=grad_norm,
                wall_time_s=time.perf_counter() - t0,
            )
            interval_nll = []
        if (
            checkpoint_path is not None
            and config.save_every
            and step % config.save_every == 0
        ):
            ckpt.metadata.update(training_steps=step, final_loss_nats=loss)
            ckpt_io.save(ckpt, checkpoint_path)

    ckpt.metadata.update(training_steps=config.max_steps, final_loss_nats=report.final_nll)
    if checkpoint_path is not None:
        ckpt_io.save(ckpt, checkpoint_path)
    return ckpt, report
