"""Operator entry points: train, generate, serve, inspect, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags or
missing input files).  Every command that takes an rng seed is
bit-reproducible: identical flags in, identical bytes out.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import corpus, protocol
from .beam import BeamConfig, beam_step
from .checkpoint import CheckpointError
from .ensemble import Ensemble, MixError
from .lstm import ModelArchitecture
from .numeric import Rng
from .server import SessionConfig, serve
from .training import TrainConfig, train


class UsageError(Exception):
    """Bad invocation (missing files, malformed flag values): exit code 2."""


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _parse_layers(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"bad --layers value {text!r}; expected e.g. 256 or 512,512")
    if not sizes:
        raise UsageError("--layers must name at least one layer size")
    return sizes


def _parse_weights(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"bad weight vector {text!r}")


class WeightSchedule:
    """Piecewise-linear weight trajectory loaded from a JSON-lines file.

    Each line is {"step": int, "weights": [floats]}.  Between scheduled
    steps the weights are interpolated; outside the range the nearest
    entry holds.  Replaying a schedule reproduces an interactive session.
    """

    def __init__(self, entries: list[tuple[int, np.ndarray]]):
        if not entries:
            raise UsageError("weight schedule is empty")
        self.entries = sorted(entries, key=lambda kv: kv[0])

    @classmethod
    def load(cls, path: Path, n_models: int) -> "WeightSchedule":
        entries = []
        for line_no, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                step = int(obj["step"])
                weights = np.asarray(obj["weights"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{path}:{line_no}: bad schedule line: {exc}")
            if weights.shape != (n_models,):
                raise UsageError(
                    f"{path}:{line_no}: schedule entry has {weights.size} weights, "
                    f"manifest has {n_models} models"
                )
            entries.append((step, weights))
        return cls(entries)

    def at(self, step: int) -> np.ndarray:
        entries = self.entries
        if step <= entries[0][0]:
            return entries[0][1]
        if step >= entries[-1][0]:
            return entries[-1][1]
        for (s0, w0), (s1, w1) in zip(entries, entries[1:]):
            if s0 <= step <= s1:
                if s1 == s0:
                    return w1
                frac = (step - s0) / (s1 - s0)
                return (1.0 - frac) * w0 + frac * w1
        return entries[-1][1]


# -- train --------------------------------------------------------------------


def cmd_train(args) -> int:
    corpus_path = _require_file(args.corpus, "corpus file")
    text, stats = corpus.load_text(corpus_path)
    try:
        corpus.write_stats_sidecar(corpus_path, stats)
    except OSError:
        pass  # read-only corpus location; stats are advisory
    arch = ModelArchitecture(layer_sizes=_parse_layers(args.layers))
    config = TrainConfig(
        dropout_prob=args.dropout,
        seq_len=args.seq_len,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        grad_clip_norm=args.clip,
        max_steps=args.steps,
        seed=args.seed,
        report_every=args.report_every,
        save_every=args.save_every,
    )
    name = args.name or corpus_path.stem
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt, report = train(text, arch, config, corpus_name=name, checkpoint_path=out)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    last = report.rows[-1]
    print(
        f"trained {name}: {args.steps} steps, "
        f"final NLL {last['nll_nats']:.4f} nats/char ({last['nll_bits']:.4f} bits), "
        f"saved to {out}"
    )
    return 0


# -- generate -----------------------------------------------------------------


def _load_manifest_models(manifest_path: Path) -> SessionConfig:
    _require_file(str(manifest_path), "manifest")
    try:
        config = SessionConfig.from_manifest(manifest_path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad manifest {manifest_path}: {exc}")
    for entry in config.models:
        _require_file(entry.path, f"checkpoint for model {entry.name!r}")
    return config


def _beam_config_from_args(args) -> BeamConfig | None:
    if not args.beam:
        return None
    return BeamConfig(
        width=args.beam_width,
        depth=args.beam_depth,
        branch=args.beam_branch,
        commit=args.beam_commit,
        stochastic=args.beam_stochastic,
    )


def cmd_generate(args) -> int:
    config = _load_manifest_models(Path(args.manifest))
    models = [(m.name, ckpt_io.load(m.path)) for m in config.models]
    temperature = config.temperature if args.temperature is None else args.temperature
    ens = Ensemble(models, threshold=config.threshold, temperature=temperature)

    if args.weights:
        weights = _parse_weights(args.weights)
        if len(weights) != ens.n_models:
            raise UsageError(
                f"--weights has {len(weights)} entries, manifest has {ens.n_models} models"
            )
        ens.set_weights(weights)
    elif config.initial_weights is not None:
        ens.set_weights(config.initial_weights)

    schedule = None
    if args.schedule:
        schedule = WeightSchedule.load(_require_file(args.schedule, "schedule file"), ens.n_models)

    if args.seed_text:
        ens.prime(args.seed_text)
    rng = Rng(args.rng_seed)
    beam_cfg = _beam_config_from_args(args)

    emitted: list[int] = []
    log_lines: list[str] = []
    while len(emitted) < args.chars:
        if schedule is not None:
            ens.set_weights(schedule.at(ens.step_index))
        if beam_cfg is not None:
            _, events, _ = beam_step(ens, beam_cfg, rng=rng)
        else:
            events = [ens.step(rng)]
        for ev in events:
            if len(emitted) >= args.chars:
                break
            emitted.append(ev.char)
            if args.event_log:
                payload = protocol.encode_message(
                    protocol.wire_event(ev, timestamp=False), "offline", ev.step
                )
                log_lines.append(payload.decode("utf-8"))

    text = "".join(chr(c) for c in emitted)
    if args.transcript:
        Path(args.transcript).write_text(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
    if args.event_log:
        Path(args.event_log).write_text("\n".join(log_lines) + "\n")
    return 0


# -- serve ----------------------------------------------------------------------


def cmd_serve(args) -> int:
    manifest_path = Path(args.manifest)
    config = _load_manifest_models(manifest_path)
    raw = json.loads(manifest_path.read_text())
    host = args.host or raw.get("host", "127.0.0.1")
    tcp_port = args.port if args.port is not None else int(raw.get("tcp_port", 7860))
    osc_port = args.osc_port if args.osc_port is not None else int(raw.get("osc_port", 7861))
    if args.cps is not None:
        config.chars_per_second = args.cps
    handle = serve(config, host=host, tcp_port=tcp_port, osc_port=osc_port)
    print(
        f"session {config.session_id!r}: {len(config.models)} models, "
        f"stream on {handle.stream.host}:{handle.stream.port}, "
        f"OSC on {handle.osc.host}:{handle.osc.port} at {protocol.OSC_WEIGHTS_ADDRESS}"
    )
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        print("\nshutting down")
    finally:
        handle.stop()
    return 0


# -- inspect ---------------------------------------------------------------------


def cmd_inspect(args) -> int:
    path = _require_file(args.checkpoint, "checkpoint")
    ckpt = ckpt_io.load(path)
    print(f"checkpoint:   {path}")
    print(ckpt_io.describe(ckpt))
    return 0


# -- bench -----------------------------------------------------------------------


def cmd_bench(args) -> int:
    config = _load_manifest_models(Path(args.manifest))
    counts = sorted({int(k) for k in args.models.split(",")})
    if counts[0] < 1:
        raise UsageError("--models counts must be positive")
    if counts[-1] > len(config.models):
        raise UsageError(
            f"--models asks for {counts[-1]} models, manifest has {len(config.models)}"
        )
    all_models = [(m.name, ckpt_io.load(m.path)) for m in config.models]
    print("models,chars_per_second,ms_per_char,steps")
    for k in counts:
        best = 0.0
        for _ in range(args.repeats):
            ens = Ensemble(all_models[:k], temperature=1.0)
            ens.set_weights([1.0] * k)  # uniform: everyone active
            ens.prime("benchmark warmup text\n")
            rng = Rng(0)
            for _ in range(5):
                ens.step(rng)
            t0 = time.perf_counter()
            for _ in range(args.steps):
                ens.step(rng)
            elapsed = time.perf_counter() - t0
            best = max(best, args.steps / elapsed)
        print(f"{k},{best:.2f},{1e3 / best:.3f},{args.steps}")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conductor",
        description="Train, run and serve a steerable ensemble of character-level models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on one corpus")
    p.add_argument("--corpus", required=True, help="plain-text training file")
    p.add_argument("--layers", default="256", help="hidden sizes, e.g. 256 or 512,512")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seq-len", type=int, default=80)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report-every", type=int, default=100)
    p.add_argument("--save-every", type=int, default=None)
    p.add_argument("--name", default=None, help="display name (default: corpus stem)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--report", default=None, help="write the train report JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="offline generation with scripted weights")
    p.add_argument("--manifest", required=True)
    p.add_argument("--weights", default=None, help="comma-separated weight vector")
    p.add_argument("--schedule", default=None, help="JSON-lines weight schedule")
    p.add_argument("--seed-text", default="", help="priming text")
    p.add_argument("--chars", type=int, default=200)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--beam", action="store_true")
    p.add_argument("--beam-width", type=int, default=4)
    p.add_argument("--beam-depth", type=int, default=4)
    p.add_argument("--beam-branch", type=int, default=4)
    p.add_argument("--beam-commit", type=int, default=1)
    p.add_argument("--beam-stochastic", action="store_true")
    p.add_argument("--event-log", default=None, help="write wire events (JSON lines)")
    p.add_argument("--transcript", default=None, help="write chars here instead of stdout")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("serve", help="run the streaming server")
    p.add_argument("--manifest", required=True, help="session config / model manifest")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None, help="stream TCP port")
    p.add_argument("--osc-port", type=int, default=None, help="OSC UDP port")
    p.add_argument("--cps", type=float, default=None, help="chars-per-second cap")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("inspect", help="summarize a checkpoint file")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="throughput vs active model count")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", default="1,2,4,8", help="comma-separated model counts")
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--repeats", type=int, default=2)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, MixError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
