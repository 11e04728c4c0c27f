"""Compact guidance-rate encoding stamped on uplink ACKs.

Wire layout (normative, 4 bytes, big-endian):

    offset 0  uint16  mantissa
    offset 2  int8    unit_exp     (power-of-two scale, may be negative)
    offset 3  uint8   flags        (bit 0 = valid, others reserved)

The carried rate is ``mantissa * 2**unit_exp`` kilobits per second. The
encoder picks the smallest exponent for which the rounded mantissa fits in
16 bits, so any encoder output has mantissa >= 0x8000 (or is zero), giving a
relative quantization error below 2**-16 across the whole usable range.
Decoding an encoder output and re-encoding it reproduces the same bits.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

FLAG_VALID = 0x01

_MANTISSA_MAX = 0xFFFF
_EXP_MIN = -128
_EXP_MAX = 127

_WIRE = struct.Struct(">HbB")
WIRE_SIZE = _WIRE.size


@dataclass(frozen=True)
class GuidanceFeedback:
    """One guidance value as carried on the wire, plus its stamp time."""

    mantissa: int
    unit_exp: int
    flags: int = FLAG_VALID
    stamped_ts: float | None = None

    @property
    def valid(self) -> bool:
        return bool(self.flags & FLAG_VALID)

    def to_bytes(self) -> bytes:
        return _WIRE.pack(self.mantissa, self.unit_exp, self.flags)

    @classmethod
    def from_bytes(cls, raw: bytes, stamped_ts: float | None = None
                   ) -> "GuidanceFeedback":
        mantissa, unit_exp, flags = _WIRE.unpack(raw[:WIRE_SIZE])
        return cls(mantissa, unit_exp, flags, stamped_ts)


def encode_rate(rate_bps: float, stamped_ts: float | None = None
                ) -> GuidanceFeedback:
    """Encode a rate in bits/s; negative rates yield an invalid-flag record."""
    if rate_bps < 0 or math.isnan(rate_bps):
        return GuidanceFeedback(0, 0, 0, stamped_ts)
    kbps = rate_bps / 1000.0
    if kbps == 0.0:
        return GuidanceFeedback(0, 0, FLAG_VALID, stamped_ts)
    # Start from the frexp estimate, then walk to the smallest exponent whose
    # rounded mantissa still fits.
    _, bin_exp = math.frexp(kbps)
    exp = max(_EXP_MIN, bin_exp - 16)
    while exp > _EXP_MIN and round(kbps / 2.0 ** (exp - 1)) <= _MANTISSA_MAX:
        exp -= 1
    while exp < _EXP_MAX and round(kbps / 2.0 ** exp) > _MANTISSA_MAX:
        exp += 1
    mantissa = round(kbps / 2.0 ** exp)
    if mantissa > _MANTISSA_MAX:
        mantissa = _MANTISSA_MAX  # saturate: rate beyond 0xFFFF * 2**127 kbps
    return GuidanceFeedback(int(mantissa), exp, FLAG_VALID, stamped_ts)


def decode_rate(fb: GuidanceFeedback) -> float | None:
    """Rate in bits/s, or None for invalid feedback (receiver holds last)."""
    if not fb.valid:
        return None
    return fb.mantissa * 2.0 ** fb.unit_exp * 1000.0
