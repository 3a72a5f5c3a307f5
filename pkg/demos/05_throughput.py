#!/usr/bin/env python3
"""Measure generation rate as more models join the active set.

Every active model runs a forward pass per character, so chars/sec falls
roughly linearly as models mix in; that is exactly why sub-5% models are
skipped during live generation. Random weights are fine here: throughput
depends on architecture, not on what the model has learned.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from charconductor import checkpoint as ckpt_io
from charconductor.cli import main as conductor
from charconductor.lstm import ModelArchitecture
from charconductor.training import init_checkpoint

HIDDEN = 192
COUNTS = "1,2,4,8"


def build_manifest(root: Path) -> Path:
    names = []
    for k in range(8):
        gen = np.random.Generator(np.random.PCG64(k))
        ckpt = init_checkpoint(
            ModelArchitecture(layer_sizes=(HIDDEN,)), gen, metadata={"corpus": f"bench{k}"}
        )
        ckpt_io.save(ckpt, root / f"bench{k}.ckpt")
        names.append(f"bench{k}")
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps({"models": [{"name": n, "checkpoint": f"{n}.ckpt"} for n in names]})
    )
    return manifest


def main():
    with tempfile.TemporaryDirectory() as tmp:
        manifest = build_manifest(Path(tmp))
        print(f"benchmarking 1x{HIDDEN} models, active counts {COUNTS}:\n")
        conductor(
            ["bench", "--manifest", str(manifest), "--models", COUNTS, "--steps", "200"]
        )
        print("\n(chars/sec falls as the active set grows; the >5% rule keeps")
        print(" many loaded-but-silent models from costing anything)")


if __name__ == "__main__":
    main()
