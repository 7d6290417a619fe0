"""Bit-level packet framing: CRC-32 attachment, padding and symbol grouping.

Bit vectors are plain ``numpy.uint8`` arrays holding 0/1 values. Bytes map to
bits most-significant bit first.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

CRC_BITS = 32
DEFAULT_MAX_DATA_BITS = 65536

_CRC32_REFLECTED_POLY = 0xEDB88320


class FramingError(ValueError):
    """Raised for malformed bit vectors or packets."""


def as_bits(bits) -> np.ndarray:
    """Validate and convert a sequence of 0/1 values to a ``uint8`` array."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise FramingError("bit vector must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise FramingError("bit vector elements must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    bits = as_bits(bits)
    if bits.size % 8:
        raise FramingError(f"{bits.size} bits is not a whole number of bytes")
    return np.packbits(bits).tobytes()


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    value = 0
    for b in as_bits(bits):
        value = (value << 1) | int(b)
    return value


def crc32_value(payload) -> int:
    """CRC-32 (IEEE 802.3) of a bit vector as an integer.

    Bits are consumed in transmission order of a reflected CRC: each octet
    least-significant bit first. A trailing partial octet is likewise read
    from its last bit to its first.
    """
    bits = as_bits(payload)
    n_full = bits.size - bits.size % 8
    crc = zlib.crc32(np.packbits(bits[:n_full]).tobytes()) ^ 0xFFFFFFFF
    for b in bits[n_full:][::-1]:
        crc ^= int(b)
        crc = (crc >> 1) ^ _CRC32_REFLECTED_POLY if crc & 1 else crc >> 1
    return crc ^ 0xFFFFFFFF


def crc32_compute(payload) -> np.ndarray:
    """Return the 32 CRC bits (MSB first) for ``payload``."""
    return int_to_bits(crc32_value(payload), CRC_BITS)


def bits_per_symbol(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise FramingError(f"modulation order M={M} is not a power of two")
    return M.bit_length() - 1


@dataclass(frozen=True)
class Packet:
    """Payload bits with their CRC and the zero pad needed for symbol grouping."""

    payload: np.ndarray
    crc: np.ndarray
    bits_per_symbol: int = 2

    def __post_init__(self):
        if len(self.crc) != CRC_BITS:
            raise FramingError(f"crc must have {CRC_BITS} bits, got {len(self.crc)}")

    @property
    def total_bits(self) -> int:
        return len(self.payload) + CRC_BITS

    @property
    def pad_bits(self) -> int:
        return -self.total_bits % self.bits_per_symbol

    @property
    def bits(self) -> np.ndarray:
        """Payload, CRC and zero padding, in transmission order."""
        return np.concatenate(
            [self.payload, self.crc, np.zeros(self.pad_bits, dtype=np.uint8)]
        )

    @property
    def n_symbols(self) -> int:
        return (self.total_bits + self.pad_bits) // self.bits_per_symbol

    def symbol_indices(self) -> np.ndarray:
        return group_bits(self.bits, 1 << self.bits_per_symbol)

    @classmethod
    def from_bits(cls, bits, n_payload_bits: int, bits_per_symbol: int = 2) -> "Packet":
        """Rebuild a packet from received bits, stripping the deterministic pad."""
        bits = as_bits(bits)
        need = n_payload_bits + CRC_BITS
        if bits.size < need:
            raise FramingError(f"need at least {need} bits, got {bits.size}")
        return cls(bits[:n_payload_bits].copy(), bits[n_payload_bits:need].copy(), bits_per_symbol)


def build_payload(data, config=None, *, M: int | None = None,
                  max_data_bits: int | None = None) -> Packet:
    """Attach a CRC-32 to ``data`` and prepare it for ``M``-ary grouping.

    ``config`` is any object with ``M`` and ``max_data_bits`` attributes
    (normally a :class:`~nuscmodem.tx.ModemConfig`); keyword arguments
    override it.
    """
    data = as_bits(data)
    if data.size == 0:
        raise FramingError("payload must contain at least one bit")
    if M is None:
        M = getattr(config, "M", 4)
    if max_data_bits is None:
        max_data_bits = getattr(config, "max_data_bits", DEFAULT_MAX_DATA_BITS)
    if data.size > max_data_bits:
        raise FramingError(
            f"payload of {data.size} bits exceeds maximum packet size of {max_data_bits} data bits"
        )
    return Packet(data.copy(), crc32_compute(data), bits_per_symbol(M))


def verify_payload(packet: Packet) -> bool:
    if len(packet.crc) != CRC_BITS:
        raise FramingError("crc must have 32 bits")
    return crc32_value(packet.payload) == bits_to_int(packet.crc)


def group_bits(bits, M: int) -> np.ndarray:
    """Group bits into big-endian symbol indices in ``[0, M)``."""
    k = bits_per_symbol(M)
    bits = as_bits(bits)
    if bits.size % k:
        raise FramingError(f"{bits.size} bits not divisible by log2(M)={k}")
    weights = 1 << np.arange(k - 1, -1, -1)
    return bits.reshape(-1, k).astype(np.int64) @ weights


def ungroup_bits(indices, M: int) -> np.ndarray:
    """Inverse of :func:`group_bits`."""
    k = bits_per_symbol(M)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= M):
        raise FramingError(f"symbol index outside [0, {M})")
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel()
