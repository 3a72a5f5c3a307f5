"""Generation server: one loop owns the ensemble, clients steer it live.

Concurrency contract: a single generation thread owns all model state.
Connection handlers never touch the ensemble directly; they validate
messages and either stage weight updates (atomic slot, read once per step)
or enqueue commands the loop applies between steps.  Outbound events fan
out through per-client bounded buffers that drop their oldest events when
a client falls behind, so a slow reader can never stall generation.
Control messages (status, errors, model lists) are never dropped.

Transports: length-prefixed JSON frames over TCP (primary, full duplex)
and an OSC 1.0 UDP listener that accepts ``/mix/weights`` packets with one
float per model, feeding the same weight-update path.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import protocol
from .beam import BeamConfig, beam_step
from .ensemble import ACTIVE_THRESHOLD, Ensemble, MixError
from .numeric import Rng
from .protocol import (
    Error,
    Event,
    ListModels,
    ModelList,
    Pause,
    Prime,
    Reset,
    Resume,
    SetDecodeMode,
    SetTemperature,
    SetWeights,
    Status,
)

DEFAULT_CHARS_PER_SECOND = 15.0


@dataclass
class ModelEntry:
    name: str
    path: str


@dataclass
class SessionConfig:
    models: list[ModelEntry]
    initial_weights: list[float] | None = None
    temperature: float = 1.0
    decode_mode: str = "sample"
    beam: BeamConfig | None = None
    rng_seed: int = 0
    chars_per_second: float = DEFAULT_CHARS_PER_SECOND
    threshold: float = ACTIVE_THRESHOLD
    session_id: str = "session-0"

    def __post_init__(self):
        if not self.models:
            raise ValueError("a session needs at least one model")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ValueError("model display names must be unique")
        if self.decode_mode not in ("sample", "beam"):
            raise ValueError(f"unknown decode mode {self.decode_mode!r}")
        if self.decode_mode == "beam" and self.beam is None:
            self.beam = BeamConfig()

    @classmethod
    def from_manifest(cls, path: str | Path, **overrides) -> "SessionConfig":
        """Load a JSON manifest; checkpoint paths resolve relative to it."""
        path = Path(path)
        data = json.loads(path.read_text())
        models = [
            ModelEntry(name=m["name"], path=str((path.parent / m["checkpoint"])))
            for m in data.get("models", [])
        ]
        kwargs = {
            "models": models,
            "initial_weights": data.get("initial_weights"),
            "temperature": data.get("temperature", 1.0),
            "decode_mode": data.get("decode_mode", "sample"),
            "rng_seed": data.get("rng_seed", 0),
            "chars_per_second": data.get("chars_per_second", DEFAULT_CHARS_PER_SECOND),
            "session_id": data.get("session", "session-0"),
        }
        if data.get("beam"):
            kwargs["beam"] = BeamConfig(**data["beam"])
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)


class ThroughputStats:
    """Rolling chars/sec, per-step latency percentiles, active model count."""

    def __init__(self, window_seconds: float = 5.0):
        self.window_seconds = window_seconds
        self._chars: deque[tuple[float, int]] = deque()
        self._latencies: deque[float] = deque(maxlen=256)
        self.active_models = 0
        self._lock = threading.Lock()

    def record(self, n_chars: int, latency_s: float, active_models: int):
        now = time.monotonic()
        with self._lock:
            self._chars.append((now, n_chars))
            self._latencies.append(latency_s)
            self.active_models = active_models
            horizon = now - self.window_seconds
            while self._chars and self._chars[0][0] < horizon:
                self._chars.popleft()

    def snapshot(self) -> dict:
        with self._lock:
            now = time.monotonic()
            total = sum(n for _, n in self._chars)
            span = (
                max(now - self._chars[0][0], 1e-9) if self._chars else self.window_seconds
            )
            lats = sorted(self._latencies)
            pct = lambda q: (lats[int(q * (len(lats) - 1))] if lats else 0.0)
            return {
                "chars_per_second": total / span,
                "latency_p50_ms": pct(0.5) * 1e3,
                "latency_p95_ms": pct(0.95) * 1e3,
                "active_models": self.active_models,
            }


class Subscriber:
    """Per-client outbound buffer: events may be dropped oldest-first, control never."""

    def __init__(self, max_events: int = 512):
        self.max_events = max_events
        self.dropped_events = 0
        self._dq: deque[tuple[bytes, bool]] = deque()
        self._event_count = 0
        self._cv = threading.Condition()
        self._closed = False

    def put(self, payload: bytes, droppable: bool):
        with self._cv:
            if self._closed:
                return
            if droppable and self._event_count >= self.max_events:
                for k, (_, d) in enumerate(self._dq):
                    if d:
                        del self._dq[k]
                        self._event_count -= 1
                        self.dropped_events += 1
                        break
            self._dq.append((payload, droppable))
            if droppable:
                self._event_count += 1
            self._cv.notify()

    def get(self, timeout: float | None = None) -> bytes | None:
        with self._cv:
            if not self._dq:
                self._cv.wait(timeout)
            if not self._dq:
                return None
            payload, droppable = self._dq.popleft()
            if droppable:
                self._event_count -= 1
            return payload

    def close(self):
        with self._cv:
            self._closed = True
            self._cv.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed


class GenerationService:
    """The generation loop plus its command surface."""

    def __init__(self, config: SessionConfig):
        self.config = config
        models = [(m.name, ckpt_io.load(m.path)) for m in config.models]
        self.ensemble = Ensemble(
            models, threshold=config.threshold, temperature=config.temperature
        )
        if config.initial_weights is not None:
            self.ensemble.set_weights(config.initial_weights)
        self.rng = Rng(config.rng_seed)
        self.decode_mode = config.decode_mode
        self.beam_config = config.beam or BeamConfig()
        self.stats = ThroughputStats()
        self.osc_dropped = 0
        self.state = "running"
        self._mailbox: queue.Queue = queue.Queue()
        self._subs: list[Subscriber] = []
        self._subs_lock = threading.Lock()
        self._seq_lock = threading.Lock()
        self._event_seq = 0
        self._control_seq = 0
        self._wake = threading.Event()
        self._stopping = False
        self._thread: threading.Thread | None = None

    # -- subscriptions ------------------------------------------------------

    def subscribe(self, max_events: int = 512) -> Subscriber:
        sub = Subscriber(max_events=max_events)
        with self._subs_lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber):
        sub.close()
        with self._subs_lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def _next_seq(self, is_event: bool) -> int:
        with self._seq_lock:
            if is_event:
                seq = self._event_seq
                self._event_seq += 1
            else:
                seq = self._control_seq
                self._control_seq += 1
            return seq

    def _encode(self, msg) -> bytes:
        seq = self._next_seq(isinstance(msg, Event))
        return protocol.encode_message(msg, self.config.session_id, seq)

    def _broadcast(self, msg):
        payload = self._encode(msg)
        droppable = isinstance(msg, Event)
        with self._subs_lock:
            subs = list(self._subs)
        for sub in subs:
            sub.put(payload, droppable)

    def send_to(self, sub: Subscriber, msg):
        sub.put(self._encode(msg), droppable=isinstance(msg, Event))

    # -- command surface (any thread) ----------------------------------------

    def model_list(self) -> ModelList:
        entries = []
        for member in self.ensemble.members:
            arch = member.ckpt.architecture
            entries.append(
                {
                    "name": member.name,
                    "layers": list(arch.layer_sizes),
                    "params": ckpt_io.param_count(arch),
                    "corpus": str(member.ckpt.metadata.get("corpus", "")),
                }
            )
        return ModelList(models=entries)

    def update_weights(self, weights) -> Error | Status:
        """Stage a weight vector; invalid input keeps the previous weights."""
        try:
            self.ensemble.set_weights(weights)
        except ValueError as exc:
            return Error(code="bad_weights", message=str(exc))
        return Status(state=self.state, detail="weights accepted")

    def update_weights_osc(self, args: list) -> bool:
        """OSC path: same validation, but failures only bump a counter."""
        if len(args) != self.ensemble.n_models or not all(
            isinstance(a, float) for a in args
        ):
            self.osc_dropped += 1
            return False
        try:
            self.ensemble.set_weights(args)
        except ValueError:
            self.osc_dropped += 1
            return False
        return True

    def handle(self, msg):
        """Dispatch one client message; returns an immediate reply or None."""
        if isinstance(msg, SetWeights):
            return self.update_weights(msg.weights)
        if isinstance(msg, ListModels):
            return self.model_list()
        if isinstance(msg, (Pause, Resume, Reset, Prime, SetTemperature, SetDecodeMode)):
            self._mailbox.put(msg)
            self._wake.set()
            return None
        return Error(code="unexpected_type", message=f"cannot handle {type(msg).__name__}")

    # -- generation loop ------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self.run, name="generation-loop", daemon=True)
        self._thread.start()

    def stop(self):
        self._stopping = True
        self._wake.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _apply(self, cmd):
        if isinstance(cmd, Pause):
            self.state = "paused"
            self._broadcast(Status(state="paused", detail="paused by client"))
        elif isinstance(cmd, Resume):
            self.state = "running"
            self._next_deadline = time.monotonic()
            self._broadcast(Status(state="running", detail="resumed"))
        elif isinstance(cmd, Reset):
            self.ensemble.reset()
            self._broadcast(Status(state=self.state, detail="reset"))
        elif isinstance(cmd, Prime):
            self.ensemble.prime(cmd.text)
            self._broadcast(Status(state=self.state, detail=f"primed {len(cmd.text)} chars"))
        elif isinstance(cmd, SetTemperature):
            self.ensemble.temperature = float(cmd.temperature)
            self._broadcast(Status(state=self.state, detail=f"temperature {cmd.temperature}"))
        elif isinstance(cmd, SetDecodeMode):
            try:
                if cmd.beam is not None:
                    self.beam_config = BeamConfig(**cmd.beam)
                self.decode_mode = cmd.mode
                self._broadcast(Status(state=self.state, detail=f"decode mode {cmd.mode}"))
            except (TypeError, ValueError) as exc:
                self._broadcast(Error(code="bad_decode_mode", message=str(exc)))

    def run(self):
        """Loop until stopped: apply commands, pace, step, broadcast."""
        interval = (
            1.0 / self.config.chars_per_second if self.config.chars_per_second > 0 else 0.0
        )
        self._next_deadline = time.monotonic()
        while not self._stopping:
            try:
                while True:
                    self._apply(self._mailbox.get_nowait())
            except queue.Empty:
                pass
            if self._stopping:
                break
            if self.state != "running":
                self._wake.wait(timeout=0.1)
                self._wake.clear()
                continue
            now = time.monotonic()
            if interval and now < self._next_deadline:
                if self._wake.wait(timeout=self._next_deadline - now):
                    self._wake.clear()
                    continue  # re-check mailbox before stepping
            started = time.perf_counter()
            try:
                if self.decode_mode == "beam":
                    _, events, _ = beam_step(self.ensemble, self.beam_config, rng=self.rng)
                else:
                    events = [self.ensemble.step(self.rng)]
            except MixError as exc:
                self.state = "paused"
                self._broadcast(Error(code="mix_error", message=str(exc)))
                self._broadcast(Status(state="paused", detail="generation paused on error"))
                continue
            latency = time.perf_counter() - started
            for ev in events:
                self._broadcast(protocol.wire_event(ev))
            self.stats.record(len(events), latency, len(events[-1].active))
            self._next_deadline = max(
                self._next_deadline + interval * len(events), time.monotonic() - interval
            )

    def status_message(self) -> Status:
        return Status(state=self.state, detail="", stats=self.stats.snapshot())


class StreamServer:
    """TCP front end speaking length-prefixed JSON frames."""

    def __init__(self, service: GenerationService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.host, self.port = self._sock.getsockname()
        self._stopping = False
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="stream-accept", daemon=True
        )

    def start(self):
        self._accept_thread.start()

    def stop(self):
        self._stopping = True
        try:
            self._sock.close()
        except OSError:
            pass

    def _accept_loop(self):
        while not self._stopping:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                break
            t = threading.Thread(
                target=self._serve_connection, args=(conn,), daemon=True
            )
            t.start()
            self._threads.append(t)

    def _serve_connection(self, conn: socket.socket):
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sub = self.service.subscribe()
        writer = threading.Thread(
            target=self._write_loop, args=(conn, sub), daemon=True
        )
        writer.start()
        decoder = protocol.FrameDecoder()
        try:
            # greet with the model list so clients can size their mixers
            self.service.send_to(sub, self.service.model_list())
            while True:
                data = conn.recv(4096)
                if not data:
                    break
                try:
                    payloads = decoder.feed(data)
                except protocol.ProtocolError as exc:
                    # length prefix out of range: the stream is desynced
                    self.service.send_to(sub, Error(code="bad_frame", message=str(exc)))
                    break
                for payload in payloads:
                    try:
                        msg, _session, _seq = protocol.decode_message(payload)
                    except protocol.ProtocolError as exc:
                        self.service.send_to(
                            sub, Error(code="bad_message", message=str(exc))
                        )
                        continue
                    reply = self.service.handle(msg)
                    if reply is not None:
                        self.service.send_to(sub, reply)
        except (ConnectionError, OSError):
            pass
        finally:
            self.service.unsubscribe(sub)
            try:
                conn.close()
            except OSError:
                pass

    def _write_loop(self, conn: socket.socket, sub: Subscriber):
        try:
            while not sub.closed:
                payload = sub.get(timeout=0.25)
                if payload is None:
                    continue
                conn.sendall(protocol.encode_frame(payload))
        except (ConnectionError, OSError):
            self.service.unsubscribe(sub)


class OscListener:
    """UDP front end for /mix/weights packets."""

    def __init__(self, service: GenerationService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self.host, self.port = self._sock.getsockname()
        self._stopping = False
        self._thread = threading.Thread(target=self._loop, name="osc-listener", daemon=True)

    def start(self):
        self._thread.start()

    def stop(self):
        self._stopping = True
        try:
            self._sock.close()
        except OSError:
            pass

    def _loop(self):
        while not self._stopping:
            try:
                data, _addr = self._sock.recvfrom(4096)
            except OSError:
                break
            try:
                address, args = protocol.parse_osc_message(data)
            except protocol.OscError:
                self.service.osc_dropped += 1
                continue
            if address != protocol.OSC_WEIGHTS_ADDRESS:
                self.service.osc_dropped += 1
                continue
            self.service.update_weights_osc(args)


@dataclass
class ServerHandle:
    service: GenerationService
    stream: StreamServer
    osc: OscListener

    def stop(self):
        self.stream.stop()
        self.osc.stop()
        self.service.stop()


def serve(
    config: SessionConfig,
    host: str = "127.0.0.1",
    tcp_port: int = 0,
    osc_port: int = 0,
    start_loop: bool = True,
) -> ServerHandle:
    """Bring up the generation loop plus both transports."""
    service = GenerationService(config)
    stream = StreamServer(service, host=host, port=tcp_port)
    osc = OscListener(service, host=host, port=osc_port)
    stream.start()
    osc.start()
    if start_loop:
        service.start()
    return ServerHandle(service=service, stream=stream, osc=osc)
