"""Seeded network-impairment channel: loss, bit corruption, duplication,
reordering, delay.

The channel is fully deterministic given a seed (numpy PCG64; the generator
algorithm is recorded in run manifests). Random draws happen in submission
order: loss, then duplication, then per-copy delay / corruption decision /
bit positions; the reorder pass draws last, after events are sorted by
delivery time. Reordering swaps the payloads of adjacent deliveries while
their time slots stay put, so the event list remains time-sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import List, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    loss_prob: float = 0.0
    corrupt_prob: float = 0.0
    bits_per_corruption: int = 1
    duplicate_prob: float = 0.0
    reorder_prob: float = 0.0
    delay_mean_us: float = 0.0
    delay_jitter_us: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        for name in ("loss_prob", "corrupt_prob", "duplicate_prob", "reorder_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]: {p}")
        if self.bits_per_corruption < 1:
            raise ValueError("bits_per_corruption must be >= 1")
        if self.delay_mean_us < 0 or self.delay_jitter_us < 0:
            raise ValueError("delays must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class DeliveryEvent:
    original_index: int
    delivered_bytes: bytes
    deliver_time_us: int


def _corrupt(data: bytes, rng: np.random.Generator, n_bits: int) -> bytes:
    buf = bytearray(data)
    positions = rng.choice(len(buf) * 8, size=min(n_bits, len(buf) * 8), replace=False)
    for pos in positions:
        buf[pos // 8] ^= 1 << (pos % 8)
    return bytes(buf)


def transmit(
    packets: Sequence[bytes],
    config: ChannelConfig,
    submit_times_us: Optional[Sequence[int]] = None,
) -> List[DeliveryEvent]:
    """Push packets through the impaired channel; returns deliveries in the
    order (and at the times) the receiver sees them."""
    config.validate()
    if submit_times_us is None:
        submit_times_us = [i * 1000 for i in range(len(packets))]
    if len(submit_times_us) != len(packets):
        raise ValueError("submit_times_us must match packets")

    rng = np.random.default_rng(config.rng_seed)
    events: List[DeliveryEvent] = []
    for idx, pkt in enumerate(packets):
        if rng.random() < config.loss_prob:
            continue
        copies = 2 if rng.random() < config.duplicate_prob else 1
        for _ in range(copies):
            delay = config.delay_mean_us
            if config.delay_jitter_us > 0:
                delay += config.delay_jitter_us * rng.standard_normal()
            deliver = int(submit_times_us[idx] + max(0.0, delay))
            payload = pkt
            if len(pkt) and rng.random() < config.corrupt_prob:
                payload = _corrupt(pkt, rng, config.bits_per_corruption)
            events.append(DeliveryEvent(idx, payload, deliver))

    events.sort(key=lambda e: (e.deliver_time_us, e.original_index))
    if config.reorder_prob > 0:
        i = 0
        while i < len(events) - 1:
            if rng.random() < config.reorder_prob:
                a, b = events[i], events[i + 1]
                events[i] = DeliveryEvent(b.original_index, b.delivered_bytes, a.deliver_time_us)
                events[i + 1] = DeliveryEvent(a.original_index, a.delivered_bytes, b.deliver_time_us)
                i += 2
            else:
                i += 1
    return events
