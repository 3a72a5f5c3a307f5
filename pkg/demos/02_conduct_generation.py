#!/usr/bin/env python3
"""Steer generation between two styles with a scripted weight trajectory.

This is the offline version of dragging a slider from one model to the
other: the weight vector moves from all-verse to all-kernel and back while
characters stream out of the shared loop. Watch the output morph; around
the crossover the ensemble favors character sequences both corpora share.
"""

import sys
from pathlib import Path

from charconductor import checkpoint as ckpt_io
from charconductor.ensemble import Ensemble
from charconductor.numeric import Rng

RUNS = Path(__file__).parent / "runs"


def weight_trajectory(step: int, period: int = 240) -> list[float]:
    """Triangle wave verse->kernel->verse over `period` steps."""
    phase = (step % period) / period
    w = 2 * phase if phase < 0.5 else 2 * (1 - phase)
    return [1.0 - w, w]


def main():
    if not (RUNS / "verse.ckpt").exists():
        sys.exit("run demos/01_train_styles.py first")
    models = [(n, ckpt_io.load(RUNS / f"{n}.ckpt")) for n in ("verse", "kernel")]
    ens = Ensemble(models, temperature=0.9)
    ens.prime("The ")
    rng = Rng(7)

    print("conducting 720 characters, verse <-> kernel:\n")
    line = ""
    for step in range(720):
        ens.set_weights(weight_trajectory(step))
        ev = ens.step(rng)
        line += chr(ev.char)
        if ev.char == 10 or len(line) > 100:
            verse_w, kernel_w = ev.pi
            gauge = "v" * round(10 * verse_w) + "k" * round(10 * kernel_w)
            print(f"{gauge:<12}| {line.rstrip()}")
            line = ""
    if line:
        print(f"{'':<12}| {line}")


if __name__ == "__main__":
    main()
