"""Versioned checkpoint container: JSON header + raw tensor blob.

Layout:  ``b"CCHK" | u32 version | u32 header_len | header JSON | blob``.
The header carries the format version, architecture, gate order tag,
numeric precision, corpus metadata and a tensor directory (name, shape,
dtype, offset); the blob is the tensors' raw little-endian bytes in
directory order.  Serialization is canonical (sorted JSON keys, fixed
tensor order, CRC32 of the blob), so ``save(load(f)) == f`` byte for byte.

Assumption recorded here because it lives in the file format: the output
head reads only the top layer's hidden vector, and the fused gate blocks
are ordered [input, forget, cell-candidate, output] ("ifgo").
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .lstm import GATE_ORDER, LstmLayerParams, ModelArchitecture, ModelCheckpoint

MAGIC = b"CCHK"
FORMAT_VERSION = 1
_HEADER_STRUCT = struct.Struct(">4sII")


class CheckpointError(Exception):
    """Raised for corrupt, truncated, or incompatible checkpoint files."""


def _tensor_items(ckpt: ModelCheckpoint) -> list[tuple[str, np.ndarray]]:
    items = []
    for k, layer in enumerate(ckpt.layers):
        items.append((f"layers.{k}.w_x", layer.w_x))
        items.append((f"layers.{k}.w_h", layer.w_h))
        items.append((f"layers.{k}.b", layer.b))
    items.append(("head.w_y", ckpt.w_y))
    items.append(("head.b_y", ckpt.b_y))
    return items


def save(ckpt: ModelCheckpoint, path: str | Path) -> Path:
    """Write a checkpoint; validates tensors first."""
    ckpt.validate()
    path = Path(path)
    directory = []
    chunks = []
    offset = 0
    for name, arr in _tensor_items(ckpt):
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in (np.float32, np.float64):
            raise CheckpointError(f"tensor {name} has unsupported dtype {arr.dtype}")
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        directory.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": arr.dtype.newbyteorder("<").str,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    precision = str(np.asarray(ckpt.w_y).dtype)
    header = {
        "format_version": FORMAT_VERSION,
        "gate_order": GATE_ORDER,
        "precision": precision,
        "architecture": {
            "layer_sizes": list(ckpt.architecture.layer_sizes),
            "input_dim": ckpt.architecture.input_dim,
            "output_dim": ckpt.architecture.output_dim,
        },
        "metadata": ckpt.metadata,
        "tensors": directory,
        "blob_crc32": zlib.crc32(blob),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER_STRUCT.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(blob)
    return path


def load(path: str | Path) -> ModelCheckpoint:
    """Read and validate a checkpoint file."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER_STRUCT.size:
        raise CheckpointError("file too short for checkpoint preamble")
    magic, version, header_len = _HEADER_STRUCT.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    header_end = _HEADER_STRUCT.size + header_len
    if len(data) < header_end:
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[_HEADER_STRUCT.size : header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("gate_order") != GATE_ORDER:
        raise CheckpointError(f"unknown gate order {header.get('gate_order')!r}")
    blob = data[header_end:]
    if zlib.crc32(blob) != header.get("blob_crc32"):
        raise CheckpointError("checkpoint blob failed CRC check (truncated or corrupt)")

    tensors = {}
    for rec in header["tensors"]:
        start, nbytes = rec["offset"], rec["nbytes"]
        if start + nbytes > len(blob):
            raise CheckpointError(f"tensor {rec['name']} extends past end of file")
        arr = np.frombuffer(blob[start : start + nbytes], dtype=np.dtype(rec["dtype"]))
        tensors[rec["name"]] = arr.reshape(rec["shape"]).copy()

    arch_rec = header["architecture"]
    arch = ModelArchitecture(
        layer_sizes=tuple(arch_rec["layer_sizes"]),
        input_dim=arch_rec["input_dim"],
        output_dim=arch_rec["output_dim"],
    )
    try:
        layers = [
            LstmLayerParams(
                w_x=tensors[f"layers.{k}.w_x"],
                w_h=tensors[f"layers.{k}.w_h"],
                b=tensors[f"layers.{k}.b"],
            )
            for k in range(arch.num_layers)
        ]
        ckpt = ModelCheckpoint(
            architecture=arch,
            layers=layers,
            w_y=tensors["head.w_y"],
            b_y=tensors["head.b_y"],
            metadata=header.get("metadata", {}),
        )
    except KeyError as exc:
        raise CheckpointError(f"missing tensor in checkpoint: {exc}") from exc
    try:
        ckpt.validate()
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint: {exc}") from exc
    return ckpt


def param_count(arch: ModelArchitecture) -> int:
    """Number of scalar parameters for an architecture."""
    total = 0
    d = arch.input_dim
    for h in arch.layer_sizes:
        total += 4 * h * (d + h + 1)
        d = h
    total += arch.output_dim * (arch.layer_sizes[-1] + 1)
    return total


def describe(ckpt: ModelCheckpoint) -> str:
    """Human-readable checkpoint summary for the inspect command."""
    arch = ckpt.architecture
    meta = ckpt.metadata
    lines = [
        f"architecture: {len(arch.layer_sizes)} layer(s) {list(arch.layer_sizes)}, "
        f"{arch.input_dim} -> {arch.output_dim}",
        f"parameters:   {param_count(arch)}",
        f"gate order:   {GATE_ORDER}",
        f"precision:    {np.asarray(ckpt.w_y).dtype}",
    ]
    for key in ("corpus", "training_steps", "final_loss_nats", "seed", "rng_algorithm"):
        if key in meta:
            lines.append(f"{key + ':':<14}{meta[key]}")
    return "\n".join(lines)
