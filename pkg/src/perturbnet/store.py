"""Bit-exact binary serialization of model snapshots.

Layers whose weight matrices are at least 10% zeros are stored sparsely:
a nonzero-position bitmap plus the packed nonzero values. The bitmap
costs 1 bit per entry, so the sparse form is smaller than the dense
8-bytes-per-entry block for any zero fraction above ~2%, and models at
the 15%+ sparsity the perturbation routine produces always compress.
Zero-vs-nonzero is decided on the raw bit pattern, so a stray -0.0 round
trips exactly. Layout details: docs/model_format.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .models import Network
from .nn import ACTIVATIONS, LayerState
from .perturb import sparsity

MAGIC = b"PTRB1"
SCHEMA_VERSION = 1
SPARSE_THRESHOLD = 0.10

KINDS = ("basic_dnn", "basic_dae", "stacked_dae", "encoder", "classifier", "ae_block")
TASKS = ("none", "binary", "multiclass")


class ModelFileError(DataError):
    pass


class BadMagicError(ModelFileError):
    pass


class VersionMismatchError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


@dataclass
class SaveInfo:
    path: Path
    num_bytes: int
    layer_encodings: list  # "dense" | "sparse" per layer


def _f64_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _bitmap(flat_bool: np.ndarray) -> bytes:
    return np.packbits(flat_bool.astype(np.uint8)).tobytes()


def _unbitmap(raw: bytes, count: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=count)
    return bits.astype(bool)


def save_model(net: Network, path, task: str = "none", seed: int = 0, force_dense: bool = False) -> SaveInfo:
    """Write the snapshot; returns the byte size and per-layer encoding."""
    if net.kind not in KINDS:
        raise ValueError(f"unknown model kind {net.kind!r}")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    for i, layer in enumerate(net.layers):
        if not (np.isfinite(layer.W).all() and np.isfinite(layer.b).all()):
            raise ValueError(f"layer {i} contains non-finite values")

    out = bytearray()
    out += MAGIC
    out += struct.pack("<BBBH", SCHEMA_VERSION, KINDS.index(net.kind), TASKS.index(task), len(net.layers))
    out += struct.pack("<Hq", net.encoder_len, seed)
    out += struct.pack("<d", sparsity(net.layers) if net.layers else 0.0)
    for layer in net.layers:
        out += struct.pack("<IIB", layer.out_dim, layer.in_dim, ACTIVATIONS.index(layer.activation))

    encodings = []
    for layer in net.layers:
        flat = np.ascontiguousarray(layer.W, dtype="<f8").reshape(-1)
        nonzero = flat.view(np.uint64) != 0  # bit-pattern test keeps -0.0 intact
        zero_frac = (flat.size - int(nonzero.sum())) / flat.size
        use_sparse = zero_frac >= SPARSE_THRESHOLD and not force_dense
        if use_sparse:
            values = flat[nonzero]
            out += struct.pack("<BQ", 1, values.size)
            out += _bitmap(nonzero)
            out += values.tobytes()
            encodings.append("sparse")
        else:
            out += struct.pack("<B", 0)
            out += flat.tobytes()
            encodings.append("dense")
        out += _f64_bytes(layer.b)
        out += _bitmap(layer.mask.reshape(-1) != 0.0)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_bytes(bytes(out))
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return SaveInfo(path=path, num_bytes=len(out), layer_encodings=encodings)


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedFileError(f"{self.path}: truncated (wanted {n} bytes at offset {self.pos})")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_header(r: _Reader) -> dict:
    if r.take(len(MAGIC)) != MAGIC:
        raise BadMagicError(f"{r.path}: bad magic, not a model file")
    version, kind_i, task_i, layer_count = r.unpack("<BBBH")
    if version != SCHEMA_VERSION:
        raise VersionMismatchError(f"{r.path}: schema version {version}, expected {SCHEMA_VERSION}")
    encoder_len, seed = r.unpack("<Hq")
    (sparsity_pct,) = r.unpack("<d")
    if kind_i >= len(KINDS) or task_i >= len(TASKS):
        raise ModelFileError(f"{r.path}: invalid kind/task byte")
    dims = []
    for _ in range(layer_count):
        out_dim, in_dim, act_i = r.unpack("<IIB")
        if act_i >= len(ACTIVATIONS):
            raise ModelFileError(f"{r.path}: invalid activation byte {act_i}")
        dims.append((out_dim, in_dim, ACTIVATIONS[act_i]))
    return {
        "version": version,
        "kind": KINDS[kind_i],
        "task": TASKS[task_i],
        "layer_count": layer_count,
        "encoder_len": encoder_len,
        "seed": seed,
        "sparsity_pct": sparsity_pct,
        "layer_dims": dims,
    }


def load_model(path):
    """Read a model file back into (Network, header dict); bit-exact."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    r = _Reader(raw, path)
    header = _read_header(r)
    layers = []
    for out_dim, in_dim, activation in header["layer_dims"]:
        size = out_dim * in_dim
        (enc,) = r.unpack("<B")
        if enc == 0:
            W = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(out_dim, in_dim).copy()
        elif enc == 1:
            (nnz,) = r.unpack("<Q")
            nonzero = _unbitmap(r.take((size + 7) // 8), size)
            if int(nonzero.sum()) != nnz:
                raise ModelFileError(f"{path}: sparse bitmap count mismatch")
            values = np.frombuffer(r.take(8 * nnz), dtype="<f8")
            flat = np.zeros(size, dtype=np.float64)
            flat[nonzero] = values
            W = flat.reshape(out_dim, in_dim)
        else:
            raise ModelFileError(f"{path}: unknown layer encoding byte {enc}")
        b = np.frombuffer(r.take(8 * out_dim), dtype="<f8").copy()
        mask = _unbitmap(r.take((size + 7) // 8), size).astype(np.float64).reshape(out_dim, in_dim)
        layers.append(LayerState(W=W, b=b, activation=activation, mask=mask))
    if r.pos != len(raw):
        raise ModelFileError(f"{path}: {len(raw) - r.pos} trailing bytes")
    net = Network(
        kind=header["kind"],
        layers=layers,
        encoder_len=header["encoder_len"],
        dropout_layers=tuple(range(header["encoder_len"])),
    )
    return net, header


def inspect_model(path) -> dict:
    """Header plus per-layer encoding info, without keeping the weights."""
    net, header = load_model(path)
    header = dict(header)
    header["current_sparsity_pct"] = sparsity(net.layers) if net.layers else 0.0
    header["file_bytes"] = Path(path).stat().st_size
    return header
