"""Fixed-layout binary codec for the simulated wire.

Upload: 12 gradient components as little-endian IEEE-754 singles (48 bytes)
followed by the sample count as an unsigned little-endian 32-bit integer,
52 bytes total. Broadcast: just the 12 coefficients, 48 bytes. Values are
deliberately narrowed to 32 bits on the wire; full 64-bit state lives only
on disk and in memory.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .client import ClientUpdate
from .hazard import CoefMatrix

__all__ = [
    "CodecError",
    "UPDATE_SIZE",
    "BROADCAST_SIZE",
    "encode_update",
    "decode_update",
    "encode_broadcast",
    "decode_broadcast",
]

UPDATE_SIZE = 52
BROADCAST_SIZE = 48
MAX_SAMPLE_COUNT = 2**32 - 1

_UPDATE_STRUCT = struct.Struct("<12fI")
_BROADCAST_STRUCT = struct.Struct("<12f")


class CodecError(ValueError):
    """A value cannot be encoded, or bytes cannot be decoded."""


_F32_MAX = float(np.finfo(np.float32).max)


def _check_vector(values) -> list[float]:
    vec = [float(v) for v in values]
    if len(vec) != 12:
        raise CodecError(f"expected 12 components, got {len(vec)}")
    for i, v in enumerate(vec):
        if not math.isfinite(v):
            raise CodecError(f"component {i} is not finite: {v}")
        if abs(v) > _F32_MAX:
            raise CodecError(f"component {i} overflows the 32-bit range: {v}")
    return vec


def encode_update(update: ClientUpdate) -> bytes:
    """Serialise one client update into its 52-byte wire form."""
    vec = _check_vector(update.pseudo_gradient)
    if not 0 < update.sample_count <= MAX_SAMPLE_COUNT:
        raise CodecError(f"sample_count {update.sample_count} outside the 4-byte field")
    return _UPDATE_STRUCT.pack(*vec, update.sample_count)


def decode_update(payload: bytes, user_id: int = 0) -> ClientUpdate:
    if len(payload) != UPDATE_SIZE:
        raise CodecError(f"update payload must be {UPDATE_SIZE} bytes, got {len(payload)}")
    *vec, n = _UPDATE_STRUCT.unpack(payload)
    return ClientUpdate(np.array(vec, dtype=np.float64), int(n), user_id)


def encode_broadcast(beta: CoefMatrix) -> bytes:
    """Serialise the global coefficient matrix into its 48-byte wire form."""
    return _BROADCAST_STRUCT.pack(*_check_vector(beta.flat()))


def decode_broadcast(payload: bytes) -> CoefMatrix:
    if len(payload) != BROADCAST_SIZE:
        raise CodecError(f"broadcast payload must be {BROADCAST_SIZE} bytes, got {len(payload)}")
    return CoefMatrix.from_flat(np.array(_BROADCAST_STRUCT.unpack(payload), dtype=np.float64))
