"""Edge hub: per-device sessions, payload recovery, segment storage, health.

Ingestion decodes each datagram, updates the device session, and appends
recovered payloads to the open segment in sample-index order behind a
bounded reorder window. Missing or unrecoverable spans become explicit gap
records. Sampling-rate statistics are computed from device send timestamps
(not arrival times), isolating clock jitter from network delay.
"""

from __future__ import annotations

import shutil
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import segments, wireproto
from .wireproto import DecodeOutcome, DecodeStatus

QUARANTINE_ID = -1


@dataclass
class HubConfig:
    reorder_window: int = 64
    segment_rollover_samples: int = 1 << 22
    rate_window: int = 4096
    known_devices: Optional[Tuple[int, ...]] = None  # None -> auto-register
    nominal_rates: Dict[int, int] = field(default_factory=dict)
    storage_dir: Optional[Path] = None


@dataclass
class RateEstimate:
    mean_hz: float
    std_hz: float
    n: int


class DeviceSession:
    """Mutable per-device ingestion state. One writer at a time."""

    def __init__(self, device_id: int, config: HubConfig):
        self.device_id = device_id
        self.config = config
        self.received = 0
        self.recovered = 0
        self.unrecoverable = 0
        self.lost = 0
        self.header_invalid = 0
        self.stale_discards = 0
        self.bytes_received = 0
        self.last_seq: Optional[int] = None
        self.last_seen_us: Optional[int] = None
        self.first_seen_us: Optional[int] = None
        # reorder window: seq -> (header, samples or None for unrecoverable)
        self.pending: Dict[int, Tuple[wireproto.PacketHeader, Optional[np.ndarray]]] = {}
        self.expected_seq: Optional[int] = None
        self.next_sample_index: Optional[int] = None
        self.rates: deque = deque(maxlen=config.rate_window)
        self._rate_prev: Optional[Tuple[int, int, int]] = None  # seq, send_us, n_samples
        self.segments: List[segments.SignalSegment] = []
        self.open_segment: Optional[segments.SignalSegment] = None

    # -- segment plumbing ---------------------------------------------------

    def _segment_for(self, header: wireproto.PacketHeader) -> segments.SignalSegment:
        seg = self.open_segment
        if seg is not None and seg.n_stored + seg.n_missing >= self.config.segment_rollover_samples:
            self.segments.append(seg)
            seg = self.open_segment = None
        if seg is None:
            seg = segments.SignalSegment(
                device_id=self.device_id,
                start_sample_index=self.next_sample_index
                if self.next_sample_index is not None
                else header.first_sample_index,
                start_time_us=header.send_time_us,
                nominal_rate_hz=self.config.nominal_rates.get(self.device_id, 0),
            )
            self.open_segment = seg
        return seg

    def _emit(self, header: wireproto.PacketHeader, samples: Optional[np.ndarray]) -> None:
        """Append one in-order packet (samples, or a gap when None)."""
        seg = self._segment_for(header)
        if self.next_sample_index is None:
            self.next_sample_index = header.first_sample_index
        if header.first_sample_index > self.next_sample_index:
            # defensive: device skipped indices; account as gap
            seg.add_gap(header.first_sample_index - self.next_sample_index)
            self.next_sample_index = header.first_sample_index
        elif header.first_sample_index < self.next_sample_index:
            self.stale_discards += 1
            return
        n = header.samples_per_packet
        if samples is None:
            seg.add_gap(n)
        else:
            seg.append_samples(samples)
        self.next_sample_index += n
        self._track_rate(header)

    def _track_rate(self, header: wireproto.PacketHeader) -> None:
        prev = self._rate_prev
        n = header.samples_per_packet
        if prev is not None and header.seq == prev[0] + 1:
            dt_us = header.send_time_us - prev[1]
            if dt_us > 0:
                self.rates.append(prev[2] * 1e6 / dt_us)
        self._rate_prev = (header.seq, header.send_time_us, n)

    def _drain(self) -> None:
        assert self.expected_seq is not None
        while self.expected_seq in self.pending:
            header, samples = self.pending.pop(self.expected_seq)
            self._emit(header, samples)
            self.expected_seq += 1

    def _concede_to(self, seq: int) -> None:
        """Give up on packets below `seq`; their span becomes a gap."""
        assert self.expected_seq is not None
        missing = seq - self.expected_seq
        if missing <= 0:
            return
        self.lost += missing
        header, _ = self.pending[seq]
        if self.next_sample_index is None:
            self.next_sample_index = header.first_sample_index
        elif header.first_sample_index > self.next_sample_index:
            seg = self._segment_for(header)
            seg.add_gap(header.first_sample_index - self.next_sample_index)
            self.next_sample_index = header.first_sample_index
        self._rate_prev = None  # broken seq chain, skip the rate pair
        self.expected_seq = seq

    def accept(self, header: wireproto.PacketHeader, samples: Optional[np.ndarray]) -> None:
        if self.expected_seq is None:
            self.expected_seq = header.seq
            self.next_sample_index = header.first_sample_index
        if header.seq < self.expected_seq or header.seq in self.pending:
            self.stale_discards += 1
            return
        if samples is None:
            self.unrecoverable += 1
        else:
            self.received += 1
        self.pending[header.seq] = (header, samples)
        self.last_seq = max(self.last_seq, header.seq) if self.last_seq is not None else header.seq
        self._drain()
        while self.pending and (
            max(self.pending) - self.expected_seq > self.config.reorder_window
            or len(self.pending) > self.config.reorder_window
        ):
            self._concede_to(min(self.pending))
            self._drain()

    def finalize(self, end: Optional[Tuple[int, int]] = None) -> None:
        """Close the reorder window; `end` = (seq count, total sample count)
        of the finished stream lets a known tail be conceded as loss."""
        while self.pending:
            self._concede_to(min(self.pending))
            self._drain()
        if end is not None and self.expected_seq is not None:
            end_seq, end_sample_index = end
            if end_seq > self.expected_seq:
                self.lost += end_seq - self.expected_seq
                self.expected_seq = end_seq
            if (
                self.next_sample_index is not None
                and self.open_segment is not None
                and end_sample_index > self.next_sample_index
            ):
                self.open_segment.add_gap(end_sample_index - self.next_sample_index)
                self.next_sample_index = end_sample_index
        if self.open_segment is not None:
            self.segments.append(self.open_segment)
            self.open_segment = None

    # -- reporting ----------------------------------------------------------

    def rate_estimate(self) -> Optional[RateEstimate]:
        if len(self.rates) < 2:
            return None
        arr = np.asarray(self.rates)
        return RateEstimate(float(arr.mean()), float(arr.std(ddof=1)), len(arr))

    @property
    def accounted(self) -> int:
        return self.received + self.lost + self.unrecoverable

    @property
    def loss_pct(self) -> float:
        return 100.0 * self.lost / self.accounted if self.accounted else 0.0

    @property
    def recovered_pct(self) -> float:
        return 100.0 * self.recovered / self.received if self.received else 0.0

    def all_segments(self) -> List[segments.SignalSegment]:
        out = list(self.segments)
        if self.open_segment is not None:
            out.append(self.open_segment)
        return out


@dataclass
class DeviceHealth:
    device_id: int
    measured_rate_mean_hz: Optional[float]
    measured_rate_std_hz: Optional[float]
    loss_pct: float
    recovered_pct: float
    last_seen_us: Optional[int]
    received: int
    lost: int
    recovered: int
    unrecoverable: int
    stored_samples: int
    missing_samples: int
    data_rate_gb_per_day: Optional[float]

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class HealthReport:
    devices: List[DeviceHealth]
    disk_bytes_free: int
    uptime_s: float
    header_invalid: int
    unknown_device: int

    def to_dict(self) -> dict:
        return {
            "devices": [d.to_dict() for d in self.devices],
            "disk_bytes_free": self.disk_bytes_free,
            "uptime_s": self.uptime_s,
            "header_invalid": self.header_invalid,
            "unknown_device": self.unknown_device,
        }


class EdgeHub:
    """In-home ingestion and storage service. Thread-safe."""

    def __init__(self, config: Optional[HubConfig] = None):
        self.config = config or HubConfig()
        self.sessions: Dict[int, DeviceSession] = {}
        self.header_invalid = 0
        self.unknown_device = 0
        self.started_monotonic = time.monotonic()
        self._lock = threading.RLock()

    def _session(self, device_id: int) -> DeviceSession:
        sess = self.sessions.get(device_id)
        if sess is None:
            sess = self.sessions[device_id] = DeviceSession(device_id, self.config)
        return sess

    def ingest(self, datagram: bytes, arrival_time_us: int) -> DecodeOutcome:
        outcome = wireproto.decode_packet(datagram)
        with self._lock:
            if outcome.status is DecodeStatus.HEADER_INVALID:
                self.header_invalid += 1
                return outcome
            header = outcome.header
            assert header is not None
            known = self.config.known_devices
            if known is not None and header.device_id not in known:
                self.unknown_device += 1
                return outcome
            sess = self._session(header.device_id)
            sess.last_seen_us = arrival_time_us
            if sess.first_seen_us is None:
                sess.first_seen_us = arrival_time_us
            sess.bytes_received += len(datagram)
            if outcome.status is DecodeStatus.RECOVERED:
                sess.recovered += 1
            if outcome.ok:
                sess.accept(header, outcome.samples)
            else:  # unrecoverable: seq is known, payload is not
                sess.accept(header, None)
        return outcome

    def finalize(self, ends: Optional[Dict[int, Tuple[int, int]]] = None) -> None:
        """Close all sessions; `ends[device_id] = (n_packets, n_samples)`."""
        with self._lock:
            for dev, sess in self.sessions.items():
                sess.finalize((ends or {}).get(dev))

    def estimate_rate(self, device_id: int) -> Optional[RateEstimate]:
        with self._lock:
            sess = self.sessions.get(device_id)
            return sess.rate_estimate() if sess else None

    def health_report(self) -> HealthReport:
        with self._lock:
            devices = []
            for dev in sorted(self.sessions):
                sess = self.sessions[dev]
                est = sess.rate_estimate()
                gb_day = None
                if (
                    sess.first_seen_us is not None
                    and sess.last_seen_us is not None
                    and sess.last_seen_us > sess.first_seen_us
                ):
                    elapsed_s = (sess.last_seen_us - sess.first_seen_us) / 1e6
                    gb_day = sess.bytes_received / elapsed_s * 86400 / 1e9
                stored = sum(s.n_stored for s in sess.all_segments())
                missing = sum(s.n_missing for s in sess.all_segments())
                devices.append(
                    DeviceHealth(
                        device_id=dev,
                        measured_rate_mean_hz=est.mean_hz if est else None,
                        measured_rate_std_hz=est.std_hz if est else None,
                        loss_pct=sess.loss_pct,
                        recovered_pct=sess.recovered_pct,
                        last_seen_us=sess.last_seen_us,
                        received=sess.received,
                        lost=sess.lost,
                        recovered=sess.recovered,
                        unrecoverable=sess.unrecoverable,
                        stored_samples=stored,
                        missing_samples=missing,
                        data_rate_gb_per_day=gb_day,
                    )
                )
            return HealthReport(
                devices=devices,
                disk_bytes_free=shutil.disk_usage(self.config.storage_dir or Path.cwd()).free,
                uptime_s=time.monotonic() - self.started_monotonic,
                header_invalid=self.header_invalid,
                unknown_device=self.unknown_device,
            )

    def write_segments(self, out_dir: "Path | str") -> List[Path]:
        """Persist every closed and open segment as .vseg files."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        with self._lock:
            for dev in sorted(self.sessions):
                for i, seg in enumerate(self.sessions[dev].all_segments()):
                    path = out / f"device{dev:05d}_seg{i:04d}.vseg"
                    segments.write_segment(path, seg)
                    written.append(path)
        return written
