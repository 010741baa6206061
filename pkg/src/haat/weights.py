"""Binary weight files (HAATW format).

Layout, all little-endian:

* magic: 8 bytes ``HAATW1\\0\\0`` (5-byte tag, 1-byte version, 2 bytes zero)
* config block: 16 signed 32-bit fields, namely channels, num_rdg,
  sdrcbs_per_rdg, stl_growth, window_size, grid_size, head_dim, the three
  mal head counts (grid, window, shifted), squeeze_factor, mlp_ratio and
  alpha in micro-units (value times 1e6, rounded), scale, img_channels,
  and a reserved zero
* u32 tensor count, then per tensor: u16 name length, UTF-8 name, u8 rank,
  rank u32 dims, raw row-major float32 data

Tensor values roundtrip bit-identically; mlp_ratio and alpha roundtrip
exactly whenever they are multiples of 1e-6.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import (
    BadMagicError,
    TruncatedFileError,
    UnsupportedVersionError,
    WeightFileError,
)
from .model import Haat, ModelConfig, build_model
from .params import ParamStore

MAGIC_TAG = b"HAATW"
VERSION = b"1"
_MAGIC = MAGIC_TAG + VERSION + b"\x00\x00"
_CONFIG_FIELDS = 16
_MICRO = 1_000_000


def _config_block(cfg: ModelConfig) -> bytes:
    values = (
        cfg.channels, cfg.num_rdg, cfg.sdrcbs_per_rdg, cfg.stl_growth,
        cfg.window_size, cfg.grid_size, cfg.head_dim,
        cfg.mal_heads[0], cfg.mal_heads[1], cfg.mal_heads[2],
        cfg.squeeze_factor,
        int(round(cfg.mlp_ratio * _MICRO)),
        int(round(cfg.alpha * _MICRO)),
        cfg.scale, cfg.img_channels, 0,
    )
    return struct.pack(f"<{_CONFIG_FIELDS}i", *values)


def _parse_config(block: bytes) -> ModelConfig:
    v = struct.unpack(f"<{_CONFIG_FIELDS}i", block)
    return ModelConfig(
        channels=v[0], num_rdg=v[1], sdrcbs_per_rdg=v[2], stl_growth=v[3],
        window_size=v[4], grid_size=v[5], head_dim=v[6],
        mal_heads=(v[7], v[8], v[9]),
        squeeze_factor=v[10],
        mlp_ratio=v[11] / _MICRO,
        alpha=v[12] / _MICRO,
        scale=v[13], img_channels=v[14],
    )


def save_weights(store, cfg: ModelConfig, path: str) -> None:
    """Write all tensors of a store (or any name -> array mapping) to ``path``."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_config_block(cfg))
        items = list(store.items())
        fh.write(struct.pack("<I", len(items)))
        for name, tensor in items:
            data = np.ascontiguousarray(
                tensor.data if hasattr(tensor, "data") else tensor, dtype="<f4"
            )
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise WeightFileError(f"tensor name too long to store: {name[:40]}...")
            if data.ndim > 0xFF:
                raise WeightFileError(f"tensor rank {data.ndim} too large to store")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def _need(fh: BinaryIO, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"file ended while reading {what}")
    return buf


def read_weight_file(path: str) -> tuple[ModelConfig, dict[str, np.ndarray]]:
    """Parse a weight file into its config and raw float32 arrays.

    Raises :class:`BadMagicError` for foreign files,
    :class:`UnsupportedVersionError` for future versions, and
    :class:`TruncatedFileError` when the file ends before its declared
    content; nothing is partially returned.
    """
    with open(path, "rb") as fh:
        head = _need(fh, len(_MAGIC), "magic header")
        if head[:5] != MAGIC_TAG:
            raise BadMagicError("not a weight file (bad magic)")
        if head[5:6] != VERSION or head[6:8] != b"\x00\x00":
            raise UnsupportedVersionError(
                f"unsupported weight format version {head[5:6]!r}"
            )
        cfg = _parse_config(_need(fh, 4 * _CONFIG_FIELDS, "config block"))
        (count,) = struct.unpack("<I", _need(fh, 4, "tensor count"))
        arrays: dict[str, np.ndarray] = {}
        for i in range(count):
            (name_len,) = struct.unpack("<H", _need(fh, 2, f"tensor {i} name length"))
            name = _need(fh, name_len, f"tensor {i} name").decode("utf-8")
            (rank,) = struct.unpack("<B", _need(fh, 1, f"'{name}' rank"))
            shape = struct.unpack(f"<{rank}I", _need(fh, 4 * rank, f"'{name}' dims"))
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw = _need(fh, 4 * size, f"'{name}' data")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise WeightFileError("trailing bytes after declared content")
    return cfg, arrays


def load_model(path: str) -> tuple[Haat, ParamStore]:
    """Build a model from a weight file's config and fill in its tensors."""
    cfg, arrays = read_weight_file(path)
    cfg.validate()
    model, store = build_model(cfg, seed=0)
    store.assign_arrays(arrays)
    return model, store


def load_weights(path: str) -> tuple[ParamStore, ModelConfig]:
    """Registry-level view of :func:`load_model`: the filled store plus config."""
    model, store = load_model(path)
    return store, model.cfg


def load_into(store: ParamStore, path: str) -> ModelConfig:
    """Load a file's tensors into an existing store; strict name/shape match."""
    cfg, arrays = read_weight_file(path)
    store.assign_arrays(arrays)
    return cfg
