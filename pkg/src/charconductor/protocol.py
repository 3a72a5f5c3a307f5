"""Wire surface: length-prefixed JSON frames plus an OSC datagram input.

Stream transport: each frame is a 4-byte big-endian payload length followed
by UTF-8 JSON.  Every message is self-describing, carrying ``v`` (protocol
version), ``type``, ``session`` and a monotone ``seq`` (events and control
messages number their own sequences).  See PROTOCOL.md for byte-level
examples.

Datagram transport: OSC 1.0 messages addressed to ``/mix/weights`` with one
float32 argument per model update the mixture weights through the same
validation path as the stream's set_weights.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

PROTOCOL_VERSION = 1
MAX_FRAME_BYTES = 1 << 24  # a frame longer than this means the stream desynced
ROW_TOP_K = 16
OSC_WEIGHTS_ADDRESS = "/mix/weights"


class ProtocolError(Exception):
    """Malformed frame or message; the connection can usually continue."""


class OscError(Exception):
    """Malformed OSC packet; datagrams are dropped, never answered."""


_REGISTRY: dict[str, type] = {}


def _message(tag: str):
    def register(cls):
        cls.TYPE = tag
        _REGISTRY[tag] = cls
        return cls

    return register


def _fail(why: str):
    raise ProtocolError(why)


def _check_number(x, what: str):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        _fail(f"{what} must be a finite number, got {x!r}")


def _check_number_list(xs, what: str):
    if not isinstance(xs, list):
        _fail(f"{what} must be a list")
    for x in xs:
        _check_number(x, f"{what} entry")


def _check_int(x, what: str, minimum=None):
    if isinstance(x, bool) or not isinstance(x, int):
        _fail(f"{what} must be an integer, got {x!r}")
    if minimum is not None and x < minimum:
        _fail(f"{what} must be >= {minimum}")


def _check_str(x, what: str):
    if not isinstance(x, str):
        _fail(f"{what} must be a string")


# -- client -> server ------------------------------------------------------


@_message("set_weights")
@dataclass
class SetWeights:
    weights: list

    def validate(self):
        _check_number_list(self.weights, "weights")
        if not self.weights:
            _fail("weights must not be empty")


@_message("prime")
@dataclass
class Prime:
    text: str

    def validate(self):
        _check_str(self.text, "text")


@_message("pause")
@dataclass
class Pause:
    def validate(self):
        pass


@_message("resume")
@dataclass
class Resume:
    def validate(self):
        pass


@_message("reset")
@dataclass
class Reset:
    def validate(self):
        pass


@_message("set_temperature")
@dataclass
class SetTemperature:
    temperature: float

    def validate(self):
        _check_number(self.temperature, "temperature")
        if self.temperature < 0:
            _fail("temperature must be >= 0")


@_message("set_decode_mode")
@dataclass
class SetDecodeMode:
    mode: str
    beam: dict | None = None

    def validate(self):
        if self.mode not in ("sample", "beam"):
            _fail(f"unknown decode mode {self.mode!r}")
        if self.beam is not None:
            if not isinstance(self.beam, dict):
                _fail("beam config must be an object")
            allowed = {"width", "depth", "branch", "commit", "stochastic"}
            for key, value in self.beam.items():
                if key not in allowed:
                    _fail(f"unknown beam field {key!r}")
                if key == "stochastic":
                    if not isinstance(value, bool):
                        _fail("stochastic must be a boolean")
                else:
                    _check_int(value, f"beam.{key}", minimum=1)


@_message("list_models")
@dataclass
class ListModels:
    def validate(self):
        pass


# -- server -> client ------------------------------------------------------


@_message("model_list")
@dataclass
class ModelList:
    models: list  # [{name, layers, params, corpus}]

    def validate(self):
        if not isinstance(self.models, list):
            _fail("models must be a list")
        for m in self.models:
            if not isinstance(m, dict):
                _fail("model entry must be an object")
            _check_str(m.get("name"), "model name")


@_message("event")
@dataclass
class Event:
    step: int
    char: int
    rho: list  # full 128-entry joint distribution
    rows: list  # per active model: {model, top: [[char, p], ...], residual}
    pi: list
    active: list
    t: float | None = None

    def validate(self):
        _check_int(self.step, "step", minimum=0)
        _check_int(self.char, "char", minimum=0)
        if self.char > 127:
            _fail("char must be an ASCII code")
        _check_number_list(self.rho, "rho")
        if len(self.rho) != 128:
            _fail("rho must have 128 entries")
        _check_number_list(self.pi, "pi")
        if not isinstance(self.active, list):
            _fail("active must be a list")
        for i in self.active:
            _check_int(i, "active entry", minimum=0)
        if not isinstance(self.rows, list):
            _fail("rows must be a list")
        for row in self.rows:
            if not isinstance(row, dict):
                _fail("row must be an object")
            _check_int(row.get("model"), "row model", minimum=0)
            _check_number(row.get("residual"), "row residual")
            top = row.get("top")
            if not isinstance(top, list):
                _fail("row top must be a list")
            for pair in top:
                if not (isinstance(pair, list) and len(pair) == 2):
                    _fail("row top entries must be [char, p] pairs")
                _check_int(pair[0], "row char", minimum=0)
                _check_number(pair[1], "row probability")
        if self.t is not None:
            _check_number(self.t, "t")


@_message("status")
@dataclass
class Status:
    state: str
    detail: str = ""
    stats: dict | None = None

    def validate(self):
        _check_str(self.state, "state")
        _check_str(self.detail, "detail")
        if self.stats is not None and not isinstance(self.stats, dict):
            _fail("stats must be an object")


@_message("error")
@dataclass
class Error:
    code: str
    message: str

    def validate(self):
        _check_str(self.code, "code")
        _check_str(self.message, "message")


_ENVELOPE_KEYS = ("v", "type", "session", "seq")


def encode_message(msg, session: str, seq: int) -> bytes:
    """Message dataclass -> JSON payload bytes (no frame header)."""
    body = dataclasses.asdict(msg)
    for key in _ENVELOPE_KEYS:
        if key in body:
            raise ProtocolError(f"field {key!r} collides with the envelope")
    obj = {"v": PROTOCOL_VERSION, "type": msg.TYPE, "session": session, "seq": seq, **body}
    try:
        return json.dumps(obj, sort_keys=True, allow_nan=False).encode("utf-8")
    except ValueError as exc:
        raise ProtocolError(f"unencodable message: {exc}") from exc


def decode_message(payload: bytes):
    """JSON payload bytes -> (message, session, seq); strict validation."""
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        _fail("message must be a JSON object")
    if obj.get("v") != PROTOCOL_VERSION:
        _fail(f"unsupported protocol version {obj.get('v')!r}")
    tag = obj.get("type")
    cls = _REGISTRY.get(tag)
    if cls is None:
        _fail(f"unknown message type {tag!r}")
    session = obj.get("session")
    _check_str(session, "session")
    _check_int(obj.get("seq"), "seq", minimum=0)
    body = {k: v for k, v in obj.items() if k not in _ENVELOPE_KEYS}
    names = {f.name for f in dataclasses.fields(cls)}
    required = {
        f.name
        for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    }
    unknown = set(body) - names
    missing = required - set(body)
    if unknown:
        _fail(f"unknown fields for {tag}: {sorted(unknown)}")
    if missing:
        _fail(f"missing fields for {tag}: {sorted(missing)}")
    msg = cls(**body)
    msg.validate()
    return msg, session, int(obj["seq"])


# -- stream framing ---------------------------------------------------------


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the limit")
    return struct.pack(">I", len(payload)) + payload


class FrameDecoder:
    """Incremental frame splitter.

    Partial input is buffered; complete payloads come back in order.  An
    oversized length prefix raises, because past that point the stream can
    no longer be trusted to be aligned.
    """

    def __init__(self, max_frame: int = MAX_FRAME_BYTES):
        self.max_frame = max_frame
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= 4:
            (length,) = struct.unpack_from(">I", self._buf)
            if length > self.max_frame:
                raise ProtocolError(f"frame of {length} bytes exceeds the limit")
            if len(self._buf) < 4 + length:
                break
            frames.append(bytes(self._buf[4 : 4 + length]))
            del self._buf[: 4 + length]
        return frames

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


# -- event downsampling -----------------------------------------------------


def wire_event(ev, top_k: int = ROW_TOP_K, timestamp: bool = True) -> Event:
    """Build the wire form of a generation event.

    The joint distribution ships in full; per-model rows are cut to the
    top ``top_k`` characters plus the residual mass, which is all a bar
    display needs.
    """
    rows = []
    for model_index in sorted(ev.rows):
        row = np.asarray(ev.rows[model_index])
        order = np.lexsort((np.arange(row.size), -row))[:top_k]
        top = [[int(c), float(row[c])] for c in order]
        rows.append(
            {
                "model": int(model_index),
                "top": top,
                "residual": max(0.0, float(1.0 - sum(p for _, p in top))),
            }
        )
    return Event(
        step=int(ev.step),
        char=int(ev.char),
        rho=[float(p) for p in ev.rho],
        rows=rows,
        pi=[float(w) for w in ev.pi],
        active=[int(i) for i in ev.active],
        t=float(ev.timestamp) if timestamp else None,
    )


# -- OSC datagrams -----------------------------------------------------------


def _read_osc_string(data: bytes, offset: int) -> tuple[str, int]:
    end = data.find(b"\x00", offset)
    if end < 0:
        raise OscError("unterminated OSC string")
    try:
        text = data[offset:end].decode("ascii")
    except UnicodeDecodeError as exc:
        raise OscError(f"non-ASCII OSC string: {exc}") from exc
    return text, offset + (((end - offset) + 4) & ~3)


def parse_osc_message(data: bytes) -> tuple[str, list]:
    """Parse one OSC 1.0 message into (address, args).

    Supports float32 ('f'), int32 ('i') and string ('s') arguments, which
    covers controller traffic; bundles are rejected.
    """
    try:
        address, offset = _read_osc_string(data, 0)
        if address.startswith("#"):
            raise OscError("OSC bundles are not supported")
        if not address.startswith("/"):
            raise OscError(f"OSC address must start with '/', got {address!r}")
        tags, offset = _read_osc_string(data, offset)
        if not tags.startswith(","):
            raise OscError("missing OSC type tag string")
        args: list = []
        for tag in tags[1:]:
            if tag == "f":
                (value,) = struct.unpack_from(">f", data, offset)
                args.append(float(value))
                offset += 4
            elif tag == "i":
                (value,) = struct.unpack_from(">i", data, offset)
                args.append(int(value))
                offset += 4
            elif tag == "s":
                value, offset = _read_osc_string(data, offset)
                args.append(value)
            else:
                raise OscError(f"unsupported OSC type tag {tag!r}")
        return address, args
    except struct.error as exc:
        raise OscError(f"truncated OSC packet: {exc}") from exc


def build_osc_message(address: str, args: list[float]) -> bytes:
    """Encode an all-float OSC message (the shape controllers send us)."""

    def pad(chunk: bytes) -> bytes:
        return chunk + b"\x00" * (4 - len(chunk) % 4 if len(chunk) % 4 else 4)

    out = pad(address.encode("ascii"))
    out += pad(("," + "f" * len(args)).encode("ascii"))
    for x in args:
        out += struct.pack(">f", float(x))
    return out
