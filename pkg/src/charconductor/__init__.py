"""Steerable text generation from an ensemble of character-level LSTM models.

Each model is trained on its own corpus and predicts a distribution over the
128 ASCII codes for the next character.  At generation time every active
model runs on the same input stream, the per-model distributions are mixed by
a live weight vector, one character is sampled from the mix and fed back.
A streaming server exposes the loop to clients that adjust the weights while
text is being generated.
"""

import os as _os

# Cap BLAS threading before numpy loads: the matrices here are small enough
# that thread fan-out only adds overhead, and single-threaded kernels keep
# training bit-reproducible.  Explicit user settings win.
for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from . import beam, checkpoint, corpus, ensemble, lstm, numeric, protocol, training

__all__ = [
    "beam",
    "checkpoint",
    "corpus",
    "ensemble",
    "lstm",
    "numeric",
    "protocol",
    "training",
]

__version__ = "0.1.0"
