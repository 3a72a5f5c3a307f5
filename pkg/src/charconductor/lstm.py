"""Multi-layer LSTM forward pass with a 128-way softmax head.

Cell variant: input, forget and output gates, no peepholes, no skip
connections; layer k>1 reads only the hidden vector of layer k-1, and the
output head reads only the top layer.  Gate blocks inside the fused weight
matrices are ordered [input, forget, cell-candidate, output]; that order is
part of the checkpoint format (see :mod:`charconductor.checkpoint`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .corpus import ALPHABET_SIZE
from .numeric import softmax

GATE_ORDER = "ifgo"
MAX_LAYERS = 3

# One (h, c) pair per layer, bottom to top.
LstmState = list[tuple[np.ndarray, np.ndarray]]


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow for large negative preactivations
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass
class ModelArchitecture:
    """Layer sizes plus the fixed 128-in/128-out character interface."""

    layer_sizes: tuple[int, ...]
    input_dim: int = ALPHABET_SIZE
    output_dim: int = ALPHABET_SIZE

    def __post_init__(self):
        self.layer_sizes = tuple(int(h) for h in self.layer_sizes)
        if not 1 <= len(self.layer_sizes) <= MAX_LAYERS:
            raise ValueError(f"architecture needs 1..{MAX_LAYERS} layers, got {len(self.layer_sizes)}")
        if any(h < 1 for h in self.layer_sizes):
            raise ValueError("hidden sizes must be positive")

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes)


@dataclass
class LstmLayerParams:
    """Fused gate weights for one layer: w_x (4H x D), w_h (4H x H), b (4H)."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_x.shape[1]

    def validate(self):
        h4, d = self.w_x.shape
        if h4 % 4 != 0:
            raise ValueError("gate block rows must be a multiple of 4")
        h = h4 // 4
        if self.w_h.shape != (h4, h):
            raise ValueError(f"w_h shape {self.w_h.shape} inconsistent with w_x {self.w_x.shape}")
        if self.b.shape != (h4,):
            raise ValueError(f"bias shape {self.b.shape}, expected ({h4},)")
        for t in (self.w_x, self.w_h, self.b):
            if not np.all(np.isfinite(t)):
                raise ValueError("non-finite parameter tensor")


@dataclass
class ModelCheckpoint:
    """Everything needed to run one model: parameters plus provenance."""

    architecture: ModelArchitecture
    layers: list[LstmLayerParams]
    w_y: np.ndarray  # (128, H_top)
    b_y: np.ndarray  # (128,)
    metadata: dict[str, Any] = field(default_factory=dict)

    def validate(self):
        arch = self.architecture
        if len(self.layers) != arch.num_layers:
            raise ValueError("layer count does not match architecture")
        d = arch.input_dim
        for h, layer in zip(arch.layer_sizes, self.layers):
            layer.validate()
            if layer.hidden_size != h or layer.input_size != d:
                raise ValueError(
                    f"layer expects ({layer.hidden_size}, {layer.input_size}), architecture says ({h}, {d})"
                )
            d = h
        if self.w_y.shape != (arch.output_dim, arch.layer_sizes[-1]):
            raise ValueError(f"output head shape {self.w_y.shape} inconsistent with architecture")
        if self.b_y.shape != (arch.output_dim,):
            raise ValueError(f"output bias shape {self.b_y.shape}")
        if not (np.all(np.isfinite(self.w_y)) and np.all(np.isfinite(self.b_y))):
            raise ValueError("non-finite head tensor")


def fresh_state(architecture: ModelArchitecture) -> LstmState:
    """Zero hidden and cell vectors for every layer."""
    return [
        (np.zeros(h, dtype=np.float64), np.zeros(h, dtype=np.float64))
        for h in architecture.layer_sizes
    ]


def clone_state(state: LstmState) -> LstmState:
    return [(h.copy(), c.copy()) for h, c in state]


def cell_step(
    params: LstmLayerParams,
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell update.

    i = sigma(a_i), f = sigma(a_f), g = tanh(a_g), o = sigma(a_o),
    c = f*c_prev + i*g, h = o*tanh(c), with the four preactivation blocks
    read from the fused matrices in GATE_ORDER.
    """
    h = params.hidden_size
    if x.shape != (params.input_size,):
        raise ValueError(f"input shape {x.shape}, expected ({params.input_size},)")
    if h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ValueError(f"state shapes {h_prev.shape}/{c_prev.shape}, expected ({h},)")
    pre = params.w_x @ x + params.w_h @ h_prev + params.b
    i = sigmoid(pre[:h])
    f = sigmoid(pre[h : 2 * h])
    g = np.tanh(pre[2 * h : 3 * h])
    o = sigmoid(pre[3 * h :])
    c = f * c_prev + i * g
    new_h = o * np.tanh(c)
    return new_h, c


def forward(
    checkpoint: ModelCheckpoint,
    state: LstmState,
    x: np.ndarray,
) -> tuple[np.ndarray, LstmState]:
    """Consume one input vector; return (next-char distribution, new state).

    Pure: the input state is never mutated, all returned arrays are fresh.
    """
    arch = checkpoint.architecture
    if x.shape != (arch.input_dim,):
        raise ValueError(f"input shape {x.shape}, expected ({arch.input_dim},)")
    if len(state) != arch.num_layers:
        raise ValueError("state layer count does not match architecture")
    new_state: LstmState = []
    inp = x
    for layer, (h_prev, c_prev) in zip(checkpoint.layers, state):
        h, c = cell_step(layer, inp, h_prev, c_prev)
        new_state.append((h, c))
        inp = h
    dist = softmax(checkpoint.w_y @ inp + checkpoint.b_y)
    return dist, new_state
