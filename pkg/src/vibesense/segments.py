"""Signal segment store.

A segment is a run of 24-bit samples for one device, starting at a known
cumulative sample index and device timestamp. Lost spans are explicit gap
records; they are never silently filled.

File format (``.vseg``, little-endian)::

    magic  b"VSEG"
    u8     version (=1)
    u16    device_id
    u32    nominal_rate_hz (integer Hz; 0 when unknown)
    u64    start_sample_index
    u64    start_time_us
    records until EOF:
      u8 0x01  u32 count   3*count bytes of samples
      u8 0x02  u64 missing-sample count
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union

import numpy as np

from . import wireproto

MAGIC = b"VSEG"
VERSION = 1
_FIXED = struct.Struct("<4sBHIQQ")

REC_SAMPLES = 0x01
REC_GAP = 0x02


class SegmentParseError(ValueError):
    def __init__(self, offset: int, reason: str):
        super().__init__(f"segment parse error at byte {offset}: {reason}")
        self.offset = offset
        self.reason = reason


@dataclass(frozen=True)
class GapRecord:
    missing: int


@dataclass(frozen=True)
class SamplesRecord:
    samples: np.ndarray  # int32, 24-bit range

    def __eq__(self, other) -> bool:  # numpy needs an explicit array compare
        return isinstance(other, SamplesRecord) and np.array_equal(self.samples, other.samples)


Record = Union[SamplesRecord, GapRecord]


@dataclass
class SignalSegment:
    device_id: int
    start_sample_index: int
    start_time_us: int
    nominal_rate_hz: int
    records: List[Record] = field(default_factory=list)

    def append_samples(self, samples: np.ndarray) -> None:
        if len(samples) == 0:
            return
        if self.records and isinstance(self.records[-1], SamplesRecord):
            last = self.records[-1]
            self.records[-1] = SamplesRecord(np.concatenate([last.samples, samples]))
        else:
            self.records.append(SamplesRecord(np.asarray(samples, dtype=np.int32)))

    def add_gap(self, missing: int) -> None:
        if missing <= 0:
            return
        if self.records and isinstance(self.records[-1], GapRecord):
            self.records[-1] = GapRecord(self.records[-1].missing + missing)
        else:
            self.records.append(GapRecord(missing))

    @property
    def n_stored(self) -> int:
        return sum(len(r.samples) for r in self.records if isinstance(r, SamplesRecord))

    @property
    def n_missing(self) -> int:
        return sum(r.missing for r in self.records if isinstance(r, GapRecord))

    @property
    def end_sample_index(self) -> int:
        return self.start_sample_index + self.n_stored + self.n_missing

    def samples(self) -> np.ndarray:
        """All stored samples, gaps skipped."""
        parts = [r.samples for r in self.records if isinstance(r, SamplesRecord)]
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.int32)

    def to_array(self, fill: int = 0) -> np.ndarray:
        """Contiguous index-aligned array with gaps filled by `fill`."""
        out = np.full(self.n_stored + self.n_missing, fill, dtype=np.int32)
        pos = 0
        for r in self.records:
            if isinstance(r, SamplesRecord):
                out[pos : pos + len(r.samples)] = r.samples
                pos += len(r.samples)
            else:
                pos += r.missing
        return out


def write_segment(path: "Path | str", seg: SignalSegment) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _FIXED.pack(
                MAGIC,
                VERSION,
                seg.device_id,
                int(seg.nominal_rate_hz),
                seg.start_sample_index,
                seg.start_time_us,
            )
        )
        for rec in seg.records:
            if isinstance(rec, SamplesRecord):
                fh.write(bytes([REC_SAMPLES]))
                fh.write(struct.pack("<I", len(rec.samples)))
                fh.write(wireproto.pack_samples(rec.samples))
            else:
                fh.write(bytes([REC_GAP]))
                fh.write(struct.pack("<Q", rec.missing))


def read_segment(path: "Path | str") -> SignalSegment:
    data = Path(path).read_bytes()
    if len(data) < _FIXED.size:
        raise SegmentParseError(len(data), "truncated fixed header")
    magic, version, device_id, rate, start_idx, start_us = _FIXED.unpack_from(data, 0)
    if magic != MAGIC:
        raise SegmentParseError(0, f"bad magic {magic!r}")
    if version != VERSION:
        raise SegmentParseError(4, f"unsupported version {version}")
    seg = SignalSegment(device_id, start_idx, start_us, rate)
    off = _FIXED.size
    while off < len(data):
        rec_type = data[off]
        off += 1
        if rec_type == REC_SAMPLES:
            if off + 4 > len(data):
                raise SegmentParseError(off, "truncated sample-count field")
            (count,) = struct.unpack_from("<I", data, off)
            off += 4
            nbytes = 3 * count
            if off + nbytes > len(data):
                raise SegmentParseError(off, f"truncated sample data ({count} samples)")
            seg.records.append(SamplesRecord(wireproto.unpack_samples(data[off : off + nbytes])))
            off += nbytes
        elif rec_type == REC_GAP:
            if off + 8 > len(data):
                raise SegmentParseError(off, "truncated gap record")
            (missing,) = struct.unpack_from("<Q", data, off)
            off += 8
            seg.records.append(GapRecord(missing))
        else:
            raise SegmentParseError(off - 1, f"unknown record type 0x{rec_type:02x}")
    return seg
