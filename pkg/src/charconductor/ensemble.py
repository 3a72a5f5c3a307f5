"""Run several models on one shared character stream and mix their outputs.

Per step: snapshot the mixture weights, work out which models are active
(normalized weight strictly above the threshold), run each active model on
the current input character, stack the per-model next-char distributions
into a conditional matrix, combine them into the joint distribution by
weighted sum and L1 normalization, sample one character, feed it back.

Models whose weight sits at or below the threshold are skipped entirely.
When a skipped model comes back, its recurrent state is repaired from the
replay buffer of recent characters: if every missed character is still
buffered the model simply catches up (bit-identical to having never been
skipped); after longer absences the state is rebuilt from scratch over the
buffered tail, which can differ from continuous feeding and is the
documented cost of skipping a model for more steps than the buffer holds.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import lstm
from .corpus import ALPHABET_SIZE, clean, encode, encode_onehot
from .numeric import Rng, sample_categorical

ACTIVE_THRESHOLD = 0.05
BUFFER_CAPACITY = 80
DEFAULT_START_CHAR = ord("\n")


class MixError(Exception):
    """No usable mixture weight mass: generation must pause, not divide by zero."""


def active_set(pi: np.ndarray, threshold: float = ACTIVE_THRESHOLD) -> set[int]:
    """Indices whose normalized weight is strictly above the threshold.

    Falls back to the argmax model if thresholding would empty the set.
    """
    pi = np.asarray(pi, dtype=np.float64)
    total = float(pi.sum())
    if total <= 0.0:
        raise MixError("mixture weights sum to zero; nothing to run")
    chosen = np.flatnonzero(pi / total > threshold)
    if chosen.size == 0:
        return {int(np.argmax(pi))}
    return {int(i) for i in chosen}


def mix(omega: np.ndarray, pi: np.ndarray, active: set[int]) -> np.ndarray:
    """Weighted sum of the active rows of omega, L1-normalized.

    Invariant to positive rescaling of pi: the normalizer absorbs any
    common factor.  A single active row is returned as-is (it is already
    a distribution), so one-hot weights reduce to that model exactly.
    """
    idx = sorted(active)
    w = np.asarray(pi, dtype=np.float64)[idx]
    if float(w.sum()) <= 0.0:
        raise MixError("active-set weights sum to zero")
    if len(idx) == 1:
        return np.array(omega[idx[0]], dtype=np.float64)
    numerator = w @ np.asarray(omega)[idx]
    return numerator / numerator.sum()


def mix_numerator(omega: np.ndarray, pi: np.ndarray, active: set[int]) -> np.ndarray:
    """The pre-normalization weighted sum; mixing is linear in pi up to here."""
    idx = sorted(active)
    return np.asarray(pi, dtype=np.float64)[idx] @ np.asarray(omega)[idx]


def apply_temperature(rho: np.ndarray, temperature: float) -> np.ndarray:
    """Rescale a distribution in log space and renormalize.

    1.0 returns the input unchanged; 0.0 is the argmax limit (one-hot).
    Zero-probability entries stay exactly zero, so support never grows.
    """
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    rho = np.asarray(rho, dtype=np.float64)
    if temperature == 1.0:
        return rho
    if temperature == 0.0:
        out = np.zeros_like(rho)
        out[int(np.argmax(rho))] = 1.0
        return out
    with np.errstate(divide="ignore"):
        logs = np.log(rho) / temperature
    z = np.exp(logs - logs.max())
    return z / z.sum()


@dataclass
class GenerationEvent:
    """Everything a visualiser needs about one generation step."""

    step: int
    char: int
    rho: np.ndarray  # joint distribution, 128 entries
    rows: dict[int, np.ndarray]  # per active model: its next-char distribution
    pi: np.ndarray  # weight snapshot the step ran under
    active: tuple[int, ...]
    timestamp: float


@dataclass
class EnsembleMember:
    name: str
    ckpt: lstm.ModelCheckpoint
    state: lstm.LstmState = field(default_factory=list)
    consumed: int = 0  # history positions fed into this model's state
    pending_char: int | None = None  # the input char at position `consumed`
    staleness: int = 0  # steps since this model last ran
    active: bool = False
    forward_count: int = 0

    def __post_init__(self):
        if not self.state:
            self.state = lstm.fresh_state(self.ckpt.architecture)

    def feed(self, char_index: int):
        _, self.state = lstm.forward(self.ckpt, self.state, encode_onehot(char_index))
        self.forward_count += 1

    def feed_dist(self, char_index: int) -> np.ndarray:
        dist, self.state = lstm.forward(self.ckpt, self.state, encode_onehot(char_index))
        self.forward_count += 1
        return dist


class Ensemble:
    """Shared-input generation loop over registered models.

    One logical thread owns the loop; weight updates may arrive from other
    threads and land in an atomic slot that is read once per step, so a
    step always sees one coherent weight vector.
    """

    def __init__(
        self,
        models: list[tuple[str, lstm.ModelCheckpoint]],
        threshold: float = ACTIVE_THRESHOLD,
        temperature: float = 1.0,
        buffer_capacity: int = BUFFER_CAPACITY,
        start_char: int = DEFAULT_START_CHAR,
    ):
        if not models:
            raise ValueError("an ensemble needs at least one model")
        self.members = [EnsembleMember(name=n, ckpt=c) for n, c in models]
        self.threshold = threshold
        self.temperature = temperature
        self.start_char = start_char
        self.buffer: deque[int] = deque(maxlen=buffer_capacity)
        self.total_appended = 0
        self.step_index = 0
        self._weights = np.full(len(self.members), 1.0 / len(self.members))
        self._pending: np.ndarray | None = None
        self._lock = threading.Lock()

    # -- weights ----------------------------------------------------------

    @property
    def n_models(self) -> int:
        return len(self.members)

    def set_weights(self, pi) -> None:
        """Stage a new weight vector; it takes effect at the next step boundary.

        Rejects wrong length, negative or non-finite entries; the previous
        vector stays in force on rejection.
        """
        arr = np.asarray(pi, dtype=np.float64).copy()
        if arr.shape != (self.n_models,):
            raise ValueError(f"expected {self.n_models} weights, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        if np.any(arr < 0):
            raise ValueError("weights must be nonnegative")
        with self._lock:
            self._pending = arr

    def snapshot_weights(self) -> np.ndarray:
        """Adopt any staged update and return a copy of the current weights."""
        with self._lock:
            if self._pending is not None:
                self._weights = self._pending
                self._pending = None
            return self._weights.copy()

    @property
    def weights(self) -> np.ndarray:
        with self._lock:
            return self._weights.copy()

    # -- history ----------------------------------------------------------

    def reset(self) -> None:
        """Fresh states, empty history, step counter back to zero."""
        for m in self.members:
            m.state = lstm.fresh_state(m.ckpt.architecture)
            m.consumed = 0
            m.pending_char = None
            m.staleness = 0
            m.active = False
        self.buffer.clear()
        self.total_appended = 0
        self.step_index = 0

    def prime(self, seed_text: str) -> None:
        """Condition every model on a seed text, restarting from fresh state.

        The seed is ASCII-cleaned first; an empty (or fully dropped) seed is
        a no-op.  The replay buffer afterwards holds the seed's last
        ``buffer_capacity`` characters.
        """
        cleaned, _ = clean(seed_text)
        if not cleaned:
            return
        chars = encode(cleaned)
        self.reset()
        for m in self.members:
            for c in chars[:-1]:
                m.feed(int(c))
            m.consumed = len(chars) - 1
            m.pending_char = int(chars[-1])
        self.buffer.extend(int(c) for c in chars)
        self.total_appended = len(chars)

    def _ensure_started(self) -> None:
        if self.total_appended == 0:
            # Unprimed ensemble: generation begins from an implicit one-char
            # seed so replay repair stays exact.
            self.buffer.append(self.start_char)
            self.total_appended = 1
            for m in self.members:
                if m.consumed == 0:
                    m.pending_char = self.start_char

    def _catch_up(self, member: EnsembleMember) -> None:
        """Repair a stale member so it has consumed all history but the newest char.

        A member inactive for k steps missed the k characters starting at its
        own pending input; that first one it remembers itself, the rest must
        still be in the buffer, so exactness holds for k up to the buffer
        capacity.  Beyond that the state is rebuilt over the buffered tail.
        """
        target = self.total_appended - 1
        if member.consumed >= target:
            return
        oldest = self.total_appended - len(self.buffer)
        chars = list(self.buffer)
        if member.consumed >= oldest:
            for c in chars[member.consumed - oldest : target - oldest]:
                member.feed(c)
        elif member.consumed == oldest - 1 and member.pending_char is not None:
            member.feed(member.pending_char)
            for c in chars[: target - oldest]:
                member.feed(c)
        else:
            member.state = lstm.fresh_state(member.ckpt.architecture)
            for c in chars[:-1]:
                member.feed(c)
        member.consumed = target

    # -- stepping ---------------------------------------------------------

    def step(self, rng: Rng) -> GenerationEvent:
        """One sample-and-feed-back step under the current weight snapshot."""
        pi = self.snapshot_weights()
        active = active_set(pi, self.threshold)
        return self._advance(pi, active, rng=rng)

    def _advance(
        self,
        pi: np.ndarray,
        active: set[int],
        rng: Rng | None = None,
        forced_char: int | None = None,
    ) -> GenerationEvent:
        """Advance one character: forward actives, mix, pick, feed back.

        The character is sampled unless ``forced_char`` pins it (beam commits).
        """
        self._ensure_started()
        x_index = self.buffer[-1]
        order = sorted(active)
        for i in order:
            self._catch_up(self.members[i])
        omega = np.zeros((self.n_models, ALPHABET_SIZE))
        rows: dict[int, np.ndarray] = {}
        for i in order:
            dist = self.members[i].feed_dist(x_index)
            self.members[i].consumed += 1
            omega[i] = dist
            rows[i] = dist
        rho = mix(omega, pi, active)
        if forced_char is None:
            sampling = apply_temperature(rho, self.temperature)
            char = sample_categorical(sampling, rng)
        else:
            char = int(forced_char)
        self.buffer.append(char)
        self.total_appended += 1
        for i, m in enumerate(self.members):
            m.active = i in active
            m.staleness = 0 if m.active else m.staleness + 1
            if m.consumed == self.total_appended - 1:
                m.pending_char = char
        event = GenerationEvent(
            step=self.step_index,
            char=char,
            rho=rho,
            rows=rows,
            pi=pi,
            active=tuple(order),
            timestamp=time.time(),
        )
        self.step_index += 1
        return event

    def clone_member_states(self, indices=None) -> dict[int, lstm.LstmState]:
        """Deep copies of member states, detached from the live ensemble."""
        if indices is None:
            indices = range(self.n_models)
        return {int(i): lstm.clone_state(self.members[i].state) for i in indices}
