"""Versioned binary checkpoint: vocabularies, parameter tables, bin specs.

Layout (all integers little-endian u32 unless noted):

    magic "UGPIG1" | version | d |P| L |V| |R| |I|
    entity names, relation names, item names  (length-prefixed UTF-8 each)
    entity/relation/item/intent-weight/fusion matrices (f32 LE, row-major)
    bin count, then per bin: name, edge count, edges (f64 LE)
    crc32 of all preceding bytes (u32)

Matrices are stored at float32 precision while training math runs in float64;
fresh initializations are float32-representable, so save/load round-trips them
bit-exactly. Bin edges are stored at full float64 so inference re-bins
bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ingest import BinSpec
from .model import ModelParams

MAGIC = b"UGPIG1"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CheckpointFormatError(CheckpointError):
    """Not a checkpoint file (bad magic)."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an incompatible format version."""


class CheckpointIntegrityError(CheckpointError):
    """Payload corrupted or truncated."""


@dataclass
class Checkpoint:
    params: ModelParams
    entity_names: list[str]
    relation_names: list[str]
    item_names: list[str]
    bins: dict[str, BinSpec]


def _pack_string(out: bytearray, text: str) -> None:
    raw = text.encode("utf-8")
    out += struct.pack("<I", len(raw))
    out += raw


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    params = ckpt.params
    if len(ckpt.entity_names) != params.num_entities:
        raise ValueError("entity name count disagrees with entity table")
    if len(ckpt.relation_names) != params.num_relations:
        raise ValueError("relation name count disagrees with relation table")
    if len(ckpt.item_names) != params.num_items:
        raise ValueError("item name count disagrees with item table")
    out = bytearray()
    out += MAGIC
    out += struct.pack(
        "<7I",
        VERSION,
        params.dim,
        params.num_intents,
        params.num_layers,
        params.num_entities,
        params.num_relations,
        params.num_items,
    )
    for names in (ckpt.entity_names, ckpt.relation_names, ckpt.item_names):
        for name in names:
            _pack_string(out, name)
    for key in ("entity_emb", "relation_emb", "item_emb", "intent_weights", "fusion_w"):
        out += np.ascontiguousarray(params.arrays()[key], dtype="<f4").tobytes()
    out += struct.pack("<I", len(ckpt.bins))
    for feature in sorted(ckpt.bins):
        spec = ckpt.bins[feature]
        if not spec.resolved:
            raise ValueError(f"{feature}: only resolved bin specs can be checkpointed")
        _pack_string(out, feature)
        out += struct.pack("<I", len(spec.edges))
        out += np.asarray(spec.edges, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise CheckpointIntegrityError(f"truncated payload at byte offset {self.pos}")
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def matrix(self, rows: int, cols: int, dtype: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        raw = np.frombuffer(self.take(rows * cols * itemsize), dtype=dtype)
        return raw.reshape(rows, cols).astype(np.float64)


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic)")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise CheckpointIntegrityError(
            f"{path}: checksum mismatch at byte offset {len(data) - 4}: "
            f"stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    reader = _Reader(data[:-4])
    reader.take(len(MAGIC))
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version} (this build reads version {VERSION})"
        )
    dim = reader.u32()
    num_intents = reader.u32()
    num_layers = reader.u32()
    num_entities = reader.u32()
    num_relations = reader.u32()
    num_items = reader.u32()
    entity_names = [reader.string() for _ in range(num_entities)]
    relation_names = [reader.string() for _ in range(num_relations)]
    item_names = [reader.string() for _ in range(num_items)]
    params = ModelParams(
        entity_emb=reader.matrix(num_entities, dim, "<f4"),
        relation_emb=reader.matrix(num_relations, dim, "<f4"),
        item_emb=reader.matrix(num_items, dim, "<f4"),
        intent_weights=reader.matrix(num_relations, num_intents, "<f4"),
        fusion_w=reader.matrix(1, dim, "<f4")[0],
        num_layers=num_layers,
    )
    bins: dict[str, BinSpec] = {}
    for _ in range(reader.u32()):
        feature = reader.string()
        count = reader.u32()
        edges = np.frombuffer(reader.take(8 * count), dtype="<f8")
        bins[feature] = BinSpec(feature, edges=tuple(float(e) for e in edges))
    if reader.pos != len(reader.data):
        raise CheckpointIntegrityError(
            f"{path}: {len(reader.data) - reader.pos} unexpected trailing bytes at offset {reader.pos}"
        )
    return Checkpoint(
        params=params,
        entity_names=entity_names,
        relation_names=relation_names,
        item_names=item_names,
        bins=bins,
    )
