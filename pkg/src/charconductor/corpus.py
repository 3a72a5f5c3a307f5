"""Text ingestion and the shared ASCII codec.

Every model in an ensemble maps characters to indices the same way: the
identity on ASCII byte values, 128 symbols total.  That shared codec is what
makes per-model output distributions mixable row by row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

ALPHABET_SIZE = 128
DEFAULT_WINDOW_LEN = 80
DEFAULT_STRIDE = 40


@dataclass
class CorpusStats:
    """Byte bookkeeping for one cleaned corpus."""

    byte_count: int
    char_histogram: list[int]  # 128 bins over the cleaned text
    dropped_count: int  # non-ASCII bytes removed

    def to_dict(self) -> dict:
        return {
            "byte_count": self.byte_count,
            "char_histogram": self.char_histogram,
            "dropped_count": self.dropped_count,
        }


@dataclass
class CorpusWindow:
    """One training window: target is the input shifted left by one."""

    input_indices: np.ndarray
    target_indices: np.ndarray


def clean(raw: bytes | str) -> tuple[str, CorpusStats]:
    """Restrict text to the 128 ASCII codes and normalize line endings.

    Bytes >= 128 are dropped (and counted), not transliterated; CR/LF and
    lone CR become LF.  Control characters are kept.
    """
    if isinstance(raw, str):
        raw = raw.encode("utf-8", errors="surrogatepass")
    raw = raw.replace(b"\r\n", b"\n").replace(b"\r", b"\n")
    data = np.frombuffer(raw, dtype=np.uint8)
    keep = data < ALPHABET_SIZE
    kept = data[keep]
    dropped = int(data.size - kept.size)
    hist = np.bincount(kept, minlength=ALPHABET_SIZE)
    stats = CorpusStats(
        byte_count=int(kept.size),
        char_histogram=[int(n) for n in hist],
        dropped_count=dropped,
    )
    return kept.tobytes().decode("ascii"), stats


def encode(text: str) -> np.ndarray:
    """Characters to int64 indices; rejects anything outside ASCII."""
    data = np.frombuffer(text.encode("utf-8", errors="surrogatepass"), dtype=np.uint8)
    if data.size and int(data.max()) >= ALPHABET_SIZE:
        raise ValueError("text contains non-ASCII characters; clean() it first")
    return data.astype(np.int64)


def decode(indices) -> str:
    arr = np.asarray(indices, dtype=np.int64)
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= ALPHABET_SIZE):
        raise ValueError("index outside [0, 128)")
    return arr.astype(np.uint8).tobytes().decode("ascii")


def encode_onehot(index: int) -> np.ndarray:
    """128-dim one-hot column for a character index."""
    if not 0 <= index < ALPHABET_SIZE:
        raise ValueError(f"character index {index} outside [0, {ALPHABET_SIZE})")
    v = np.zeros(ALPHABET_SIZE, dtype=np.float64)
    v[index] = 1.0
    return v


def windows(
    text: str | np.ndarray,
    max_len: int = DEFAULT_WINDOW_LEN,
    stride: int = DEFAULT_STRIDE,
) -> Iterator[CorpusWindow]:
    """Slide fixed-length next-character windows over a text.

    Consecutive windows overlap by ``max_len - stride``.  A final partial
    window is emitted as long as it still has at least one input/target pair
    (two characters of source text).
    """
    if max_len < 1 or stride < 1:
        raise ValueError("max_len and stride must be >= 1")
    idx = encode(text) if isinstance(text, str) else np.asarray(text, dtype=np.int64)
    n = idx.size
    if n < 2:
        raise ValueError("text must be at least 2 characters long")
    start = 0
    while start + 1 < n:
        end = min(start + max_len, n - 1)
        yield CorpusWindow(
            input_indices=idx[start:end].copy(),
            target_indices=idx[start + 1 : end + 1].copy(),
        )
        start += stride


def load_text(path: str | Path) -> tuple[str, CorpusStats]:
    """Read a file as bytes and clean it."""
    return clean(Path(path).read_bytes())


def write_stats_sidecar(corpus_path: str | Path, stats: CorpusStats) -> Path:
    """Write ``<corpus>.stats.json`` next to the corpus file."""
    out = Path(str(corpus_path) + ".stats.json")
    out.write_text(json.dumps(stats.to_dict(), indent=2) + "\n")
    return out
