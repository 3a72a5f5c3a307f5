import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for test helper modules

from charconductor import checkpoint as ckpt_io
from charconductor import training
from charconductor.lstm import ModelArchitecture


def make_random_checkpoint(layer_sizes=(8,), seed=0, name="m"):
    gen = np.random.Generator(np.random.PCG64(seed))
    return training.init_checkpoint(
        ModelArchitecture(layer_sizes=layer_sizes),
        gen,
        metadata={"corpus": name, "seed": seed},
    )


@pytest.fixture
def checkpoint_dir(tmp_path):
    """Three small random checkpoints plus a manifest file."""
    import json

    names = ["alpha", "beta", "gamma"]
    for k, name in enumerate(names):
        ckpt = make_random_checkpoint(seed=k, name=name)
        ckpt_io.save(ckpt, tmp_path / f"{name}.ckpt")
    manifest = {
        "session": "test-session",
        "models": [{"name": n, "checkpoint": f"{n}.ckpt"} for n in names],
        "chars_per_second": 0,
        "rng_seed": 7,
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    return tmp_path
