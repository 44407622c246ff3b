"""File formats: JSON Lines logs and binary projection checkpoints.

Checkpoints are a single JSON header line (dims, step) followed by the raw
projection matrix as little-endian float64, row-major. JSON floats round-trip
exactly (repr-based), so logs replay bit-identically.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError


def write_jsonl(path: str, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str) -> Iterator[dict]:
    """Yield one dict per line; malformed lines fail with their line number."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: bad JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: record is not an object")
            yield rec


_MAGIC = "litrain-checkpoint"


def save_checkpoint(path: str, projection: np.ndarray, step: int) -> None:
    header = {
        "format": _MAGIC,
        "d_in": int(projection.shape[0]),
        "d_out": int(projection.shape[1]),
        "step": int(step),
    }
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(projection, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DataError(f"{path}: unreadable checkpoint header") from None
    if header.get("format") != _MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    d_in, d_out = int(header["d_in"]), int(header["d_out"])
    expected = d_in * d_out * 8
    if len(payload) != expected:
        raise DataError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    projection = np.frombuffer(payload, dtype="<f8").reshape(d_in, d_out).astype(np.float64)
    return projection, int(header["step"])
