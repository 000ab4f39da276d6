"""
Checkpoint files for gsn-shaper

Layout, little-endian throughout:

    b"GSNC"  u32 version
    records until end of file, each:
        u32 name length, UTF-8 name
        u32 ndim, ndim x u64 extents
        u64 payload length in bytes, float64 payload (row-major)

Record names: gen/<param>, guide/<param>, opt/<gen|guide>/m/<param>,
opt/<gen|guide>/v/<param>, opt/<gen|guide>/step and meta/<key>.
Records are written in sorted order, so equal states give equal bytes.
"""
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple
import logging
import struct

import numpy as np

from gsn_shaper.core.nets import ParamStore
from gsn_shaper.exceptions import CheckpointError
from gsn_shaper.services.optimizer import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"GSNC"
VERSION = 1
FAMILIES = ("gaussian", "bernoulli")


@dataclass
class Checkpoint:
    """Full training state at an iteration boundary."""
    step: int
    generator: ParamStore
    guide: ParamStore
    gen_opt: AdamState
    guide_opt: AdamState
    family: str = "gaussian"


def _records(ckpt: Checkpoint) -> Dict[str, np.ndarray]:
    records: Dict[str, np.ndarray] = {
        "meta/step": np.array(float(ckpt.step)),
        "meta/family": np.array(float(FAMILIES.index(ckpt.family))),
    }
    for prefix, store in (("gen", ckpt.generator), ("guide", ckpt.guide)):
        for name, value in store.items():
            records[f"{prefix}/{name}"] = value
    for prefix, state in (("gen", ckpt.gen_opt), ("guide", ckpt.guide_opt)):
        records[f"opt/{prefix}/step"] = np.array(float(state.step))
        for name in state.m:
            records[f"opt/{prefix}/m/{name}"] = state.m[name]
            records[f"opt/{prefix}/v/{name}"] = state.v[name]
    return records


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    records = _records(ckpt)
    parts = [MAGIC, struct.pack("<I", VERSION)]
    for name in sorted(records):
        value = np.ascontiguousarray(records[name], dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}Q", *value.shape))
        payload = value.tobytes()
        parts.append(struct.pack("<Q", len(payload)))
        parts.append(payload)
    return b"".join(parts)


def save_checkpoint(ckpt: Checkpoint, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    logger.info("Checkpoint at step %d written to %s", ckpt.step, path)
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, record: str) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError("truncated", record=record)
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str, record: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), record))


def decode_checkpoint(data: bytes) -> Dict[str, np.ndarray]:
    """Raw records by name; validates framing and payload sizes."""
    reader = _Reader(data)
    if reader.take(4, "header") != MAGIC:
        raise CheckpointError("bad magic bytes", record="header")
    (version,) = reader.unpack("<I", "header")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}", record="header")

    records: Dict[str, np.ndarray] = {}
    index = 0
    while reader.pos < len(data):
        (name_len,) = reader.unpack("<I", f"record {index}")
        try:
            name = reader.take(name_len, f"record {index}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("record name is not UTF-8", record=f"record {index}") from exc
        (ndim,) = reader.unpack("<I", name)
        shape = reader.unpack(f"<{ndim}Q", name)
        (size,) = reader.unpack("<Q", name)
        if size != 8 * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"payload of {size} bytes does not match shape {shape}", record=name)
        value = np.frombuffer(reader.take(size, name), dtype="<f8").reshape(shape).astype(np.float64)
        if not np.all(np.isfinite(value)):
            raise CheckpointError("non-finite values", record=name)
        if name in records:
            raise CheckpointError("duplicate record", record=name)
        records[name] = value
        index += 1
    return records


def _scalar(records: Dict[str, np.ndarray], name: str) -> int:
    if name not in records:
        raise CheckpointError("missing", record=name)
    return int(records[name])


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    records = decode_checkpoint(path.read_bytes())

    family = _scalar(records, "meta/family")
    if not 0 <= family < len(FAMILIES):
        raise CheckpointError(f"unknown decoder family {family}", record="meta/family")

    stores = {"gen": ParamStore(), "guide": ParamStore()}
    states = {"gen": AdamState(), "guide": AdamState()}
    for name, value in records.items():
        head, _, rest = name.partition("/")
        if head in stores:
            stores[head].add(rest, value)
        elif head == "opt":
            owner, _, tail = rest.partition("/")
            if owner not in states:
                raise CheckpointError("unknown optimizer owner", record=name)
            if tail == "step":
                states[owner].step = int(value)
            elif tail[:2] in ("m/", "v/"):
                getattr(states[owner], tail[0])[tail[2:]] = value
            else:
                raise CheckpointError("unknown optimizer record", record=name)
        elif head != "meta":
            raise CheckpointError("unknown record", record=name)

    for owner, store in stores.items():
        for param in store.names():
            for moment in ("m", "v"):
                if param not in getattr(states[owner], moment):
                    raise CheckpointError("missing", record=f"opt/{owner}/{moment}/{param}")

    return Checkpoint(
        step=_scalar(records, "meta/step"),
        generator=stores["gen"],
        guide=stores["guide"],
        gen_opt=states["gen"],
        guide_opt=states["guide"],
        family=FAMILIES[family],
    )
