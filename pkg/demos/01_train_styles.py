#!/usr/bin/env python3
"""Train two small models, one per bundled corpus, and save checkpoints.

The bundled corpora are deliberately tiny and stylistically loud (archaic
verse vs C-flavored source), so even a desk-scale model picks up the look
of its text in under a minute of CPU time. Later demos load the
checkpoints this script writes into demos/runs/.
"""

import json
import os
import time
from pathlib import Path

from charconductor import checkpoint as ckpt_io
from charconductor import corpus
from charconductor.lstm import ModelArchitecture
from charconductor.training import TrainConfig, train

HERE = Path(__file__).parent
RUNS = HERE / "runs"
CORPORA = HERE.parent / "corpora"

QUICK = os.environ.get("CONDUCTOR_QUICK") == "1"
STEPS = 300 if QUICK else 1200
HIDDEN = 32 if QUICK else 64


def train_one(name: str) -> None:
    text, stats = corpus.load_text(CORPORA / f"{name}.txt")
    print(f"\n=== {name}: {stats.byte_count} chars, {stats.dropped_count} dropped ===")
    config = TrainConfig(
        max_steps=STEPS,
        seq_len=60,
        batch_size=8,
        dropout_prob=0.1,
        seed=42,
        report_every=max(50, STEPS // 10),
    )
    t0 = time.perf_counter()
    ckpt, report = train(
        text,
        ModelArchitecture(layer_sizes=(HIDDEN,)),
        config,
        corpus_name=name,
        checkpoint_path=RUNS / f"{name}.ckpt",
    )
    for row in report.rows:
        print(
            f"  step {row['step']:>5}  {row['nll_nats']:.3f} nats/char "
            f"({row['nll_bits']:.3f} bits)  grad {row['grad_norm']:.2f}"
        )
    print(f"  done in {time.perf_counter() - t0:.1f}s -> {RUNS / (name + '.ckpt')}")
    print(ckpt_io.describe(ckpt))


def main():
    RUNS.mkdir(exist_ok=True)
    names = ["verse", "kernel"]
    for name in names:
        train_one(name)

    manifest = {
        "session": "demo",
        "models": [{"name": n, "checkpoint": f"{n}.ckpt"} for n in names],
        "chars_per_second": 15,
        "rng_seed": 1,
    }
    (RUNS / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"\nwrote manifest {RUNS / 'manifest.json'}")
    print("next: python demos/02_conduct_generation.py")


if __name__ == "__main__":
    main()
