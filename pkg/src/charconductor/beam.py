"""Limited-depth beam search over the joint distribution.

Instead of sampling one character at a time, look a few characters ahead:
expand the most promising continuations level by level, score each path by
the sum of the log-probabilities it accumulates under the mixed
distribution, prune to the beam width, and commit the first character(s)
of the best surviving path.  All exploration runs on detached state
copies; the live ensemble only ever advances along the committed path.

The weight vector is frozen for the duration of one search, so a user
gesture mid-search applies at the next commit boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lstm
from .corpus import ALPHABET_SIZE, encode_onehot
from .ensemble import Ensemble, GenerationEvent, active_set, apply_temperature, mix
from .numeric import Rng


@dataclass
class BeamConfig:
    width: int = 4
    depth: int = 4
    branch: int = 4
    commit: int = 1  # characters emitted per search; 1 = re-search every step
    stochastic: bool = False  # sample expansion candidates instead of top-k

    def __post_init__(self):
        if self.width < 1 or self.depth < 1:
            raise ValueError("width and depth must be >= 1")
        if not 1 <= self.branch <= ALPHABET_SIZE:
            raise ValueError(f"branch must lie in [1, {ALPHABET_SIZE}]")
        if not 1 <= self.commit <= self.depth:
            raise ValueError("commit must lie in [1, depth]")

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "depth": self.depth,
            "branch": self.branch,
            "commit": self.commit,
            "stochastic": self.stochastic,
        }


@dataclass
class BeamHypothesis:
    chars: tuple[int, ...]
    score: float  # sum of log rho along the path; <= 0
    states: dict[int, lstm.LstmState]
    pending: int  # next input character for this path


def clone_states(ensemble: Ensemble) -> dict[int, lstm.LstmState]:
    """Detached deep copy of every member's recurrent state."""
    return ensemble.clone_member_states()


def _expand_candidates(
    rho: np.ndarray, config: BeamConfig, rng: Rng | None
) -> list[int]:
    support = np.flatnonzero(rho)
    k = min(config.branch, support.size)
    if config.stochastic:
        if rng is None:
            raise ValueError("stochastic expansion needs an rng")
        picked = rng.generator.choice(ALPHABET_SIZE, size=k, replace=False, p=rho)
        return [int(c) for c in picked]
    # deterministic: best probabilities first, ties to the lower index
    order = np.lexsort((np.arange(rho.size), -rho))
    return [int(c) for c in order[:k]]


def beam_step(
    ensemble: Ensemble,
    config: BeamConfig,
    rng: Rng | None = None,
) -> tuple[list[int], list[GenerationEvent], dict]:
    """Search `depth` characters ahead, commit the best path's prefix.

    Returns (committed chars, one generation event per committed char,
    diagnostics with the final beam and its scores).  After the call the
    live ensemble state is exactly what plain feeding of the committed
    characters would have produced.
    """
    pi = ensemble.snapshot_weights()
    active = active_set(pi, ensemble.threshold)
    ensemble._ensure_started()
    for i in sorted(active):
        ensemble._catch_up(ensemble.members[i])

    root = BeamHypothesis(
        chars=(),
        score=0.0,
        states=ensemble.clone_member_states(sorted(active)),
        pending=ensemble.buffer[-1],
    )
    beam = [root]
    explored = 0
    for _ in range(config.depth):
        children: list[BeamHypothesis] = []
        for hyp in beam:
            omega = np.zeros((ensemble.n_models, ALPHABET_SIZE))
            new_states: dict[int, lstm.LstmState] = {}
            for i in sorted(active):
                member = ensemble.members[i]
                dist, state = lstm.forward(
                    member.ckpt, hyp.states[i], encode_onehot(hyp.pending)
                )
                omega[i] = dist
                new_states[i] = state
            rho = apply_temperature(mix(omega, pi, active), ensemble.temperature)
            for c in _expand_candidates(rho, config, rng):
                children.append(
                    BeamHypothesis(
                        chars=hyp.chars + (c,),
                        score=hyp.score + math.log(rho[c]),
                        states=new_states,  # children share their parent's states
                        pending=c,
                    )
                )
            explored += 1
        children.sort(key=lambda h: (-h.score, h.chars))
        beam = children[: config.width]

    best = beam[0]
    committed = list(best.chars[: config.commit])
    events = [ensemble._advance(pi, active, forced_char=c) for c in committed]
    diagnostics = {
        "best_score": best.score,
        "beam": [{"chars": list(h.chars), "score": h.score} for h in beam],
        "expansions": explored,
        "hypotheses": beam,  # live objects, for instrumentation
    }
    return committed, events, diagnostics
