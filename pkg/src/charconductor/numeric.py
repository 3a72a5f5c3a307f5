"""Dense linear-algebra and stochastic primitives shared by the whole package.

Vectors and matrices are plain float64 numpy arrays; nothing here wraps them
in classes.  The only stateful object is :class:`Rng`, which pins down the
generator algorithm so that runs can be reproduced from a logged seed.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy-pcg64"


class Rng:
    """Seeded pseudo-random source: identical seed, identical draw sequence.

    The algorithm identifier is recorded in run logs and reports so a
    transcript can always name the generator that produced it.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.algorithm = RNG_ALGORITHM
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return float(self.generator.random())

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.algorithm!r})"


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with explicit dimension checking."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"matvec expects a 2-d matrix, got shape {m.shape}")
    if v.ndim != 1:
        raise ValueError(f"matvec expects a 1-d vector, got shape {v.shape}")
    if m.shape[1] != v.shape[0]:
        raise ValueError(f"matvec shape mismatch: {m.shape} @ ({v.shape[0]},)")
    return m @ v


def softmax(v: np.ndarray) -> np.ndarray:
    """Exp-normalize with max subtraction.  Output sums to 1, argmax preserved."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax requires finite input")
    z = np.exp(v - np.max(v))
    return z / z.sum()


def sample_categorical(p: np.ndarray, rng: Rng, tol: float = 1e-6) -> int:
    """Draw an index from distribution ``p`` by inverse CDF over cumulative sums.

    Residual mass left by rounding (the cumulative sum topping out slightly
    below the uniform draw) goes to the last nonzero entry, so an index with
    zero probability is never returned.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"expected a nonempty 1-d distribution, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError("negative probability entry")
    total = float(p.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total!r}, outside 1 +/- {tol}")
    cdf = np.cumsum(p)
    u = rng.uniform()
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= p.size or p[idx] == 0.0:
        idx = int(np.flatnonzero(p)[-1])
    return idx
