"""Bit-exact UDP datagram encoding and decoding.

Every datagram is a packed sequence of 64-bit IEEE-754 little-endian
reals with no header; the element count alone selects the message kind.
One element is a command, ``d_in + d_out + 1`` elements (at least 3)
are a sample laid out ``[x, y, t]``, and anything else is malformed.
Replies carry ``[mu, t]``. Timestamps are opaque: they are never
inspected and are echoed bit-exactly, NaN payloads included.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence, Union


@dataclass(frozen=True)
class Command:
    """Single-value datagram; any scalar requests a model reset."""

    value: float


@dataclass(frozen=True)
class Sample:
    """Training point with an opaque timestamp."""

    x: tuple
    y: tuple
    t: float


@dataclass(frozen=True)
class Malformed:
    """Undecodable datagram; a value, not an exception."""

    reason: str
    byte_len: int


@dataclass(frozen=True)
class Reply:
    """Predicted mean with the echoed timestamp."""

    mu: tuple
    t: float


Message = Union[Command, Sample, Malformed]


class MalformedReplyError(ValueError):
    """Raised when reply bytes do not match the expected layout."""


def _require_finite(values: Sequence[float], label: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value in {label}: {v!r}")


def decode_datagram(data: bytes, d_in: int, d_out: int) -> Message:
    """Classify raw datagram bytes as Command, Sample, or Malformed."""
    byte_len = len(data)
    if byte_len % 8 != 0:
        return Malformed(f"byte length {byte_len} is not a multiple of 8", byte_len)
    count = byte_len // 8
    if count == 1:
        return Command(struct.unpack("<d", data)[0])
    expected = d_in + d_out + 1
    if count != expected or count < 3:
        return Malformed(
            f"element count {count} does not match d_in={d_in}, d_out={d_out}"
            f" (expected {expected})",
            byte_len,
        )
    values = struct.unpack(f"<{count}d", data)
    x = values[:d_in]
    y = values[d_in : d_in + d_out]
    # t stays opaque; only the model inputs must be finite
    if not all(math.isfinite(v) for v in x + y):
        return Malformed("non-finite sample entries", byte_len)
    return Sample(x, y, values[-1])


def encode_sample(x: Sequence[float], y: Sequence[float], t: float) -> bytes:
    """Pack a sample as ``[x, y, t]``; inverse of the Sample branch."""
    x = tuple(float(v) for v in x)
    y = tuple(float(v) for v in y)
    _require_finite(x, "x")
    _require_finite(y, "y")
    values = x + y + (float(t),)
    return struct.pack(f"<{len(values)}d", *values)


def encode_reply(mu: Sequence[float], t: float) -> bytes:
    """Pack a reply as ``[mu, t]``."""
    mu = tuple(float(v) for v in mu)
    _require_finite(mu, "mu")
    values = mu + (float(t),)
    return struct.pack(f"<{len(values)}d", *values)


def decode_reply(data: bytes, d_out: int) -> Reply:
    """Unpack reply bytes; raises MalformedReplyError on a length mismatch."""
    expected = 8 * (d_out + 1)
    if len(data) != expected:
        raise MalformedReplyError(
            f"reply is {len(data)} bytes, expected {expected} for d_out={d_out}"
        )
    values = struct.unpack(f"<{d_out + 1}d", data)
    return Reply(values[:d_out], values[-1])
