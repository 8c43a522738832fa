"""Datagram framing with per-block CRCs and an XOR parity block.

Every datagram carries ``n_blocks`` payload blocks of 24-bit little-endian
signed samples. Each block is covered by a CRC-8 (error location) and the
whole payload by one XOR parity block (error correction): any single
corrupted data block is rebuilt as the XOR of the parity block with the
remaining data blocks.

Wire layout (all little-endian)::

    0-1    magic 0x56 0x53
    2      version (=1)
    3-4    device_id        u16
    5-8    seq              u32
    9-16   first_sample_index u64
    17-24  send_time_us     u64
    25     n_blocks         u8
    26-27  block_len        u16  (bytes, multiple of 3)
    28-29  CRC-16 over bytes 0..27
    30..   n_blocks * block_len data bytes
    ..     n_blocks CRC-8 bytes (one per data block)
    ..     block_len parity bytes (bytewise XOR of all data blocks)
    ..     CRC-8 of the parity block

Checksums: CRC-8/ATM (poly 0x07, init 0x00) and CRC-16/CCITT-FALSE
(poly 0x1021, init 0xFFFF). Datagrams never exceed 1472 bytes so they fit
a 1500-MTU link without IP fragmentation.
"""

from __future__ import annotations

import binascii
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

MAGIC = b"\x56\x53"
VERSION = 1
MAX_DATAGRAM = 1472
MAX_BLOCKS = 16

_HEADER = struct.Struct("<2sBHIQQBH")  # everything before the header CRC
HEADER_LEN = _HEADER.size + 2  # + u16 CRC

SAMPLE_MIN = -(1 << 23)
SAMPLE_MAX = (1 << 23) - 1


class WireError(ValueError):
    """Invalid field values or payload sizes at encode time."""


def _make_crc8_table(poly: int = 0x07) -> bytes:
    table = bytearray(256)
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table[byte] = crc
    return bytes(table)


_CRC8_TABLE = _make_crc8_table()


def crc8(data: bytes) -> int:
    """CRC-8/ATM: poly 0x07, init 0x00. Check value of b"123456789" is 0xF4."""
    crc = 0
    table = _CRC8_TABLE
    for b in data:
        crc = table[crc ^ b]
    return crc


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF. Check value 0x29B1."""
    return binascii.crc_hqx(bytes(data), 0xFFFF)


def packet_length(n_blocks: int, block_len: int) -> int:
    """Total datagram size for the given framing."""
    return HEADER_LEN + n_blocks * block_len + n_blocks + block_len + 1


@dataclass(frozen=True)
class PacketHeader:
    device_id: int
    seq: int
    first_sample_index: int
    send_time_us: int
    n_blocks: int
    block_len: int
    version: int = VERSION

    @property
    def samples_per_packet(self) -> int:
        return self.n_blocks * self.block_len // 3

    def validate(self) -> None:
        if not 0 <= self.device_id <= 0xFFFF:
            raise WireError(f"device_id out of range: {self.device_id}")
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise WireError(f"seq out of range: {self.seq}")
        if not 0 <= self.first_sample_index < 1 << 64:
            raise WireError("first_sample_index out of range")
        if not 0 <= self.send_time_us < 1 << 64:
            raise WireError("send_time_us out of range")
        if not 1 <= self.n_blocks <= MAX_BLOCKS:
            raise WireError(f"n_blocks must be in [1, {MAX_BLOCKS}]: {self.n_blocks}")
        if self.block_len <= 0 or self.block_len % 3 != 0:
            raise WireError(f"block_len must be a positive multiple of 3: {self.block_len}")
        total = packet_length(self.n_blocks, self.block_len)
        if total > MAX_DATAGRAM:
            raise WireError(f"datagram would be {total} bytes > {MAX_DATAGRAM}")


class DecodeStatus(Enum):
    INTACT = "intact"
    RECOVERED = "recovered"
    UNRECOVERABLE = "unrecoverable"
    HEADER_INVALID = "header_invalid"


@dataclass(frozen=True)
class DecodeOutcome:
    status: DecodeStatus
    header: Optional[PacketHeader] = None
    samples: Optional[np.ndarray] = None
    recovered_block: Optional[int] = None
    failed_blocks: Tuple[int, ...] = ()
    parity_failed: bool = False

    @property
    def ok(self) -> bool:
        return self.status in (DecodeStatus.INTACT, DecodeStatus.RECOVERED)


def pack_samples(samples: Sequence[int]) -> bytes:
    """24-bit little-endian two's-complement packing."""
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size and (int(arr.max()) > SAMPLE_MAX or int(arr.min()) < SAMPLE_MIN):
        raise WireError("sample out of 24-bit signed range")
    u = (arr & 0xFFFFFF).astype(np.uint32)
    out = np.empty((arr.size, 3), dtype=np.uint8)
    out[:, 0] = u & 0xFF
    out[:, 1] = (u >> 8) & 0xFF
    out[:, 2] = (u >> 16) & 0xFF
    return out.tobytes()


def unpack_samples(data: bytes) -> np.ndarray:
    if len(data) % 3 != 0:
        raise WireError(f"sample byte count {len(data)} not a multiple of 3")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.uint32)
    vals = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
    return vals.astype(np.int32) - ((vals >> 23) & 1).astype(np.int32) * (1 << 24)


def _xor_blocks(blocks: Sequence[bytes], block_len: int) -> bytes:
    acc = 0
    for b in blocks:
        acc ^= int.from_bytes(b, "little")
    return acc.to_bytes(block_len, "little")


def encode_packet(header: PacketHeader, samples: Sequence[int]) -> bytes:
    header.validate()
    data = pack_samples(samples)
    expected = header.n_blocks * header.block_len
    if len(data) != expected:
        raise WireError(
            f"payload is {len(data)} bytes, framing needs exactly {expected}"
        )
    prefix = _HEADER.pack(
        MAGIC,
        header.version,
        header.device_id,
        header.seq,
        header.first_sample_index,
        header.send_time_us,
        header.n_blocks,
        header.block_len,
    )
    out = bytearray(prefix)
    out += crc16(prefix).to_bytes(2, "little")
    blocks = [
        data[i * header.block_len : (i + 1) * header.block_len]
        for i in range(header.n_blocks)
    ]
    out += data
    out += bytes(crc8(b) for b in blocks)
    parity = _xor_blocks(blocks, header.block_len)
    out += parity
    out.append(crc8(parity))
    return bytes(out)


def decode_packet(data: bytes) -> DecodeOutcome:
    """Decode arbitrary bytes; every failure mode maps to a DecodeOutcome."""
    invalid = DecodeOutcome(DecodeStatus.HEADER_INVALID)
    if len(data) < HEADER_LEN:
        return invalid
    stored_crc = int.from_bytes(data[_HEADER.size : HEADER_LEN], "little")
    if crc16(data[: _HEADER.size]) != stored_crc:
        return invalid
    magic, version, device_id, seq, first_idx, send_us, n_blocks, block_len = (
        _HEADER.unpack(data[: _HEADER.size])
    )
    if magic != MAGIC or version != VERSION:
        return invalid
    if not 1 <= n_blocks <= MAX_BLOCKS or block_len % 3 != 0 or block_len == 0:
        return invalid
    if len(data) != packet_length(n_blocks, block_len):
        return invalid
    header = PacketHeader(
        device_id=device_id,
        seq=seq,
        first_sample_index=first_idx,
        send_time_us=send_us,
        n_blocks=n_blocks,
        block_len=block_len,
        version=version,
    )

    off = HEADER_LEN
    blocks = [data[off + i * block_len : off + (i + 1) * block_len] for i in range(n_blocks)]
    off += n_blocks * block_len
    block_crcs = data[off : off + n_blocks]
    off += n_blocks
    parity = data[off : off + block_len]
    parity_ok = crc8(parity) == data[off + block_len]

    failed = tuple(i for i in range(n_blocks) if crc8(blocks[i]) != block_crcs[i])
    if not failed:
        return DecodeOutcome(
            DecodeStatus.INTACT, header, unpack_samples(b"".join(blocks))
        )
    if len(failed) == 1 and parity_ok:
        bad = failed[0]
        rebuilt = _xor_blocks(
            [parity] + [b for i, b in enumerate(blocks) if i != bad], block_len
        )
        blocks[bad] = rebuilt
        return DecodeOutcome(
            DecodeStatus.RECOVERED,
            header,
            unpack_samples(b"".join(blocks)),
            recovered_block=bad,
        )
    return DecodeOutcome(
        DecodeStatus.UNRECOVERABLE,
        header,
        failed_blocks=failed,
        parity_failed=not parity_ok,
    )
