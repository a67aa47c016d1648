"""CRC-24A (gCRC24A = D^24 + D^23 + D^18 + D^17 + D^14 + D^11 + D^10 + D^7 + D^6 + D^5 + D^4 + D^3 + D + 1)."""

from __future__ import annotations

import numpy as np

CRC24A_POLY = 0x864CFB
CRC_LEN = 24


def _make_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 16
        for _ in range(8):
            crc = ((crc << 1) ^ CRC24A_POLY) if crc & 0x800000 else (crc << 1)
        table.append(crc & 0xFFFFFF)
    return table


_TABLE = _make_table()


def crc24_remainder(bits) -> int:
    """Remainder of ``bits(x) * x^24`` modulo the generator, MSB first.

    Leading zeros do not change the remainder, so the input is left-padded to
    a whole number of bytes and processed with a byte table.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-bits.size) % 8
    if pad:
        bits = np.concatenate([np.zeros(pad, dtype=np.uint8), bits])
    crc = 0
    table = _TABLE
    for byte in np.packbits(bits).tolist():
        crc = ((crc << 8) & 0xFFFFFF) ^ table[(crc >> 16) ^ byte]
    return crc


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def crc24_attach(bits) -> np.ndarray:
    """Append 24 CRC parity bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("cannot attach a CRC to an empty bit sequence")
    return np.concatenate([bits, _int_to_bits(crc24_remainder(bits), CRC_LEN)])


def crc24_check(bits) -> bool:
    """True when a block produced by :func:`crc24_attach` is intact."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size <= CRC_LEN:
        return False
    return crc24_remainder(bits) == 0
