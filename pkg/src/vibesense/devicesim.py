"""Simulated plug-and-play sensing device.

Synthesizes geophone-like vibration signals for scripted activities,
samples them with a per-packet clock-jitter model, frames them as
datagrams and (optionally) streams them through the impairment channel.

Synthesis recipes give each activity kind a distinct spectral signature so
classes are separable by construction:

    footstep          repeated damped bursts, low band (~25/55 Hz), 1.8 steps/s
    door              single low thud (~18/35 Hz) plus a 250 Hz latch click
    object_place      one mid-band damped impact (~120/240 Hz)
    medication_shake  rattle of short high-band pulses (~350/650 Hz) at 7 Hz
    shower            sustained band-limited noise (60-600 Hz)
    idle              ambient noise only

The summed activity component is brick-wall band-limited to [10, 1000] Hz
in the frequency domain before ambient noise is added, so burst energy
stays inside the sensing band regardless of envelope shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import netsim, wireproto

BAND_LOW_HZ = 10.0
BAND_HIGH_HZ = 1000.0

DEFAULT_N_BLOCKS = 16
DEFAULT_BLOCK_LEN = 81  # bytes -> 27 samples per block, 432 per packet

# Full-scale amplitude 1.0 maps to this 24-bit code (leaves 12 dB headroom).
AMPLITUDE_SCALE = 2 ** 21


class ActivityKind(str, Enum):
    FOOTSTEP = "footstep"
    OBJECT_PLACE = "object_place"
    SHOWER = "shower"
    MEDICATION_SHAKE = "medication_shake"
    DOOR = "door"
    IDLE = "idle"


# Geriatric 4Ms taxonomy tags used on activities and placement targets.
FOUR_MS = ("mobility", "medication", "matters_most", "mentation")

ACTIVITY_4MS: Dict[ActivityKind, str] = {
    ActivityKind.FOOTSTEP: "mobility",
    ActivityKind.DOOR: "mobility",
    ActivityKind.OBJECT_PLACE: "matters_most",
    ActivityKind.SHOWER: "matters_most",
    ActivityKind.MEDICATION_SHAKE: "medication",
    ActivityKind.IDLE: "mentation",
}

DEFAULT_CENTER_FREQS: Dict[ActivityKind, Tuple[float, ...]] = {
    ActivityKind.FOOTSTEP: (25.0, 55.0),
    ActivityKind.DOOR: (18.0, 35.0),
    ActivityKind.OBJECT_PLACE: (120.0, 240.0),
    ActivityKind.MEDICATION_SHAKE: (350.0, 650.0),
    ActivityKind.SHOWER: (60.0, 600.0),
    ActivityKind.IDLE: (),
}


@dataclass(frozen=True)
class ScriptEntry:
    start_s: float
    duration_s: float
    kind: ActivityKind
    amplitude: float = 1.0
    center_freqs_hz: Tuple[float, ...] = ()

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    @property
    def four_ms(self) -> str:
        return ACTIVITY_4MS[self.kind]

    def freqs(self) -> Tuple[float, ...]:
        return self.center_freqs_hz or DEFAULT_CENTER_FREQS[self.kind]


@dataclass(frozen=True)
class ActivityScript:
    entries: Tuple[ScriptEntry, ...]

    def validate(self) -> None:
        ordered = sorted(self.entries, key=lambda e: e.start_s)
        for a, b in zip(ordered, ordered[1:]):
            if b.start_s < a.end_s - 1e-9:
                raise ValueError(
                    f"script entries overlap: {a.kind.value}@{a.start_s} and "
                    f"{b.kind.value}@{b.start_s}"
                )
        for e in self.entries:
            if e.duration_s <= 0:
                raise ValueError("entry duration must be positive")
            for f in e.freqs():
                if not BAND_LOW_HZ <= f <= BAND_HIGH_HZ:
                    raise ValueError(
                        f"center frequency {f} Hz outside "
                        f"[{BAND_LOW_HZ}, {BAND_HIGH_HZ}]"
                    )

    def end_s(self) -> float:
        return max((e.end_s for e in self.entries), default=0.0)

    def activities(self) -> Tuple[ScriptEntry, ...]:
        return tuple(e for e in self.entries if e.kind is not ActivityKind.IDLE)


@dataclass(frozen=True)
class ClockModel:
    nominal_rate_hz: float = 7000.0
    rate_std_hz: float = 0.0
    sync_enabled: bool = False
    drift_ppm: float = 0.0

    def validate(self) -> None:
        if self.nominal_rate_hz <= 2 * BAND_HIGH_HZ:
            raise ValueError("nominal rate must exceed Nyquist for the signal band")
        if self.rate_std_hz < 0:
            raise ValueError("rate_std_hz must be >= 0")

    @property
    def effective_nominal_hz(self) -> float:
        # edge-synced clocks have their drift corrected
        if self.sync_enabled:
            return self.nominal_rate_hz
        return self.nominal_rate_hz * (1.0 + self.drift_ppm * 1e-6)


# Fig. 6(a)-style presets: deployments 1/2 ran free-running clocks at the two
# reported nominals; deployment 3 synchronized against the edge device.
CLOCK_PRESETS: Dict[str, ClockModel] = {
    "deployment1": ClockModel(nominal_rate_hz=7000.0, rate_std_hz=734.0, sync_enabled=False, drift_ppm=40.0),
    "deployment2": ClockModel(nominal_rate_hz=6800.0, rate_std_hz=799.0, sync_enabled=False, drift_ppm=40.0),
    "deployment3": ClockModel(nominal_rate_hz=7000.0, rate_std_hz=316.0, sync_enabled=True, drift_ppm=5.0),
}


@dataclass(frozen=True)
class NoiseModel:
    ambient_std: float = 0.002
    powerline_hz: Optional[float] = None
    powerline_amp: float = 0.0

    def validate(self) -> None:
        if self.ambient_std <= 0:
            raise ValueError("ambient_std must be > 0")


def _band_limit(x: np.ndarray, rate_hz: float, lo: float = BAND_LOW_HZ, hi: float = BAND_HIGH_HZ) -> np.ndarray:
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate_hz)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spec, n=len(x))


def _damped_burst(
    rate_hz: float,
    duration_s: float,
    freqs: Sequence[float],
    tau_s: float,
    rng: np.random.Generator,
    attack_s: float = 0.008,
) -> np.ndarray:
    n = max(1, int(round(duration_s * rate_hz)))
    t = np.arange(n) / rate_hz
    env = np.exp(-t / tau_s)
    attack = np.minimum(t / attack_s, 1.0) if attack_s > 0 else 1.0
    out = np.zeros(n)
    for f in freqs:
        out += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    out *= env * attack
    peak = np.max(np.abs(out))
    return out / peak if peak > 0 else out


def _pulse_train(
    length: int,
    rate_hz: float,
    period_s: float,
    pulse: "np.ndarray | None",
    make_pulse,
) -> np.ndarray:
    out = np.zeros(length)
    pos = 0.0
    while pos * rate_hz < length:
        p = pulse if pulse is not None else make_pulse()
        start = int(round(pos * rate_hz))
        end = min(length, start + len(p))
        out[start:end] += p[: end - start]
        pos += period_s
    return out


def _entry_component(entry: ScriptEntry, rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    n = max(1, int(round(entry.duration_s * rate_hz)))
    freqs = entry.freqs()
    kind = entry.kind
    if kind is ActivityKind.IDLE:
        return np.zeros(n)
    if kind is ActivityKind.FOOTSTEP:
        return _pulse_train(
            n, rate_hz, period_s=1 / 1.8, pulse=None,
            make_pulse=lambda: _damped_burst(rate_hz, 0.25, freqs, tau_s=0.08, rng=rng),
        )
    if kind is ActivityKind.OBJECT_PLACE:
        out = np.zeros(n)
        p = _damped_burst(rate_hz, min(0.25, entry.duration_s), freqs, tau_s=0.05, rng=rng)
        out[: len(p)] = p
        return out
    if kind is ActivityKind.MEDICATION_SHAKE:
        return _pulse_train(
            n, rate_hz, period_s=1 / 7.0, pulse=None,
            make_pulse=lambda: _damped_burst(rate_hz, 0.08, freqs, tau_s=0.02, rng=rng, attack_s=0.002),
        )
    if kind is ActivityKind.DOOR:
        out = np.zeros(n)
        thud = _damped_burst(rate_hz, min(0.4, entry.duration_s), freqs, tau_s=0.1, rng=rng)
        out[: len(thud)] += thud
        click_at = int(round(0.1 * rate_hz))
        if click_at < n:
            click = 0.6 * _damped_burst(rate_hz, 0.05, (250.0,), tau_s=0.01, rng=rng, attack_s=0.001)
            end = min(n, click_at + len(click))
            out[click_at:end] += click[: end - click_at]
        return out
    if kind is ActivityKind.SHOWER:
        lo, hi = min(freqs), max(freqs)
        white = rng.standard_normal(n)
        shaped = _band_limit(white, rate_hz, lo=max(lo, BAND_LOW_HZ), hi=min(hi, BAND_HIGH_HZ))
        rms = np.sqrt(np.mean(shaped ** 2))
        if rms > 0:
            shaped /= rms * 3.0  # peak-ish normalization for comparable amplitude scale
        ramp = min(n // 4, int(0.2 * rate_hz))
        if ramp > 0:
            w = 0.5 * (1 - np.cos(np.pi * np.arange(ramp) / ramp))
            shaped[:ramp] *= w
            shaped[-ramp:] *= w[::-1]
        return shaped
    raise ValueError(f"unknown activity kind: {kind}")


def synth_activity(
    script: ActivityScript,
    rate_hz: float,
    duration_s: float,
    seed: int,
) -> np.ndarray:
    """Noise-free activity component, band-limited to [10, 1000] Hz."""
    script.validate()
    if script.end_s() > duration_s + 1e-9:
        raise ValueError("duration does not cover the script")
    n = int(round(duration_s * rate_hz))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xAC)))
    out = np.zeros(n)
    for entry in sorted(script.entries, key=lambda e: e.start_s):
        comp = entry.amplitude * _entry_component(entry, rate_hz, rng)
        start = int(round(entry.start_s * rate_hz))
        end = min(n, start + len(comp))
        out[start:end] += comp[: end - start]
    if np.any(out):
        out = _band_limit(out, rate_hz)
    return out


def synth_signal(
    script: ActivityScript,
    noise: NoiseModel,
    rate_hz: float,
    duration_s: float,
    seed: int,
) -> np.ndarray:
    """Activity component plus ambient noise (and optional powerline spur)."""
    noise.validate()
    n = int(round(duration_s * rate_hz))
    out = synth_activity(script, rate_hz, duration_s, seed)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x40)))
    out = out + rng.normal(0.0, noise.ambient_std, n)
    if noise.powerline_hz and noise.powerline_amp:
        t = np.arange(n) / rate_hz
        out += noise.powerline_amp * np.sin(2 * np.pi * noise.powerline_hz * t)
    return out


@dataclass(frozen=True)
class TruthEvent:
    device_id: int
    start_s: float
    end_s: float
    kind: ActivityKind


def write_truth_csv(path: "Path | str", events: Sequence[TruthEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["device_id", "start_s", "end_s", "activity_kind"])
        for e in events:
            w.writerow([e.device_id, f"{e.start_s:.6f}", f"{e.end_s:.6f}", e.kind.value])


def read_truth_csv(path: "Path | str") -> List[TruthEvent]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                TruthEvent(
                    int(row["device_id"]),
                    float(row["start_s"]),
                    float(row["end_s"]),
                    ActivityKind(row["activity_kind"]),
                )
            )
    return out


@dataclass
class DeviceRun:
    device_id: int
    packets: List[bytes]
    events: Optional[List[netsim.DeliveryEvent]]
    truth: List[TruthEvent]
    samples: np.ndarray            # quantized stream exactly as framed
    packet_rates: np.ndarray       # per-packet sampled rate (Hz)
    send_times_us: List[int]
    samples_per_packet: int


def quantize(signal: np.ndarray) -> np.ndarray:
    """Map float amplitudes to clipped 24-bit integer codes."""
    codes = np.rint(signal * AMPLITUDE_SCALE)
    return np.clip(codes, wireproto.SAMPLE_MIN, wireproto.SAMPLE_MAX).astype(np.int32)


def run_device(
    device_id: int,
    script: ActivityScript,
    clock: ClockModel,
    noise: NoiseModel,
    channel: Optional[netsim.ChannelConfig],
    duration_s: float,
    seed: int,
    n_blocks: int = DEFAULT_N_BLOCKS,
    block_len: int = DEFAULT_BLOCK_LEN,
    start_time_us: int = 0,
) -> DeviceRun:
    """Synthesize, frame and (optionally) impair one device's stream.

    Each packet's actual sampling rate is drawn Normal(nominal, rate_std),
    truncated positive; send timestamps advance by samples/rate so the hub's
    implied per-packet rate reproduces the draw exactly.
    """
    clock.validate()
    signal = synth_signal(script, noise, clock.nominal_rate_hz, duration_s, seed)
    samples = quantize(signal)

    spp = n_blocks * block_len // 3
    n_packets = len(samples) // spp
    samples = samples[: n_packets * spp]

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC1)))
    nominal = clock.effective_nominal_hz
    if clock.rate_std_hz > 0:
        rates = rng.normal(nominal, clock.rate_std_hz, n_packets)
        min_rate = 0.01 * nominal
        while np.any(rates <= min_rate):
            bad = rates <= min_rate
            rates[bad] = rng.normal(nominal, clock.rate_std_hz, int(bad.sum()))
    else:
        rates = np.full(n_packets, nominal)

    packets: List[bytes] = []
    send_times: List[int] = []
    t_us = float(start_time_us)
    for p in range(n_packets):
        header = wireproto.PacketHeader(
            device_id=device_id,
            seq=p,
            first_sample_index=p * spp,
            send_time_us=int(round(t_us)),
            n_blocks=n_blocks,
            block_len=block_len,
        )
        packets.append(wireproto.encode_packet(header, samples[p * spp : (p + 1) * spp]))
        send_times.append(int(round(t_us)))
        t_us += spp / rates[p] * 1e6

    events = netsim.transmit(packets, channel, send_times) if channel else None
    truth = [
        TruthEvent(device_id, e.start_s, e.end_s, e.kind)
        for e in sorted(script.activities(), key=lambda e: e.start_s)
    ]
    return DeviceRun(
        device_id=device_id,
        packets=packets,
        events=events,
        truth=truth,
        samples=samples,
        packet_rates=rates,
        send_times_us=send_times,
        samples_per_packet=spp,
    )
