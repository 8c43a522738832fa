"""Signal analysis: spectrogram, event detection, SNR, spectral features.

SNR follows the duration-normalized energy-ratio definition,
``10 * log10((E_signal / T_signal) / (E_noise / T_noise))``; with equal
durations this reduces to the mean-square ratio. The noise floor used by
the event detector is the median frame energy over its estimation window,
which is robust to embedded events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

BAND_LOW_HZ = 10.0
BAND_HIGH_HZ = 1000.0


@dataclass(frozen=True)
class SpectrogramParams:
    window_len: int = 1024
    hop_len: int = 512

    def validate(self) -> None:
        if self.window_len < 2 or self.window_len & (self.window_len - 1):
            raise ValueError("window_len must be a power of two")
        if not 0 < self.hop_len <= self.window_len:
            raise ValueError("hop_len must be in (0, window_len]")


def spectrogram(
    samples: np.ndarray, rate_hz: float, params: Optional[SpectrogramParams] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hann-windowed magnitude STFT.

    Returns (times_s, freqs_hz, mag) with mag shape (n_frames, n_bins).
    """
    params = params or SpectrogramParams()
    params.validate()
    x = np.asarray(samples, dtype=np.float64)
    if len(x) < params.window_len:
        raise ValueError(
            f"need at least window_len={params.window_len} samples, got {len(x)}"
        )
    win = np.hanning(params.window_len)
    n_frames = 1 + (len(x) - params.window_len) // params.hop_len
    starts = np.arange(n_frames) * params.hop_len
    frames = np.lib.stride_tricks.sliding_window_view(x, params.window_len)[starts]
    mag = np.abs(np.fft.rfft(frames * win, axis=1))
    times = (starts + params.window_len / 2) / rate_hz
    freqs = np.fft.rfftfreq(params.window_len, 1.0 / rate_hz)
    return times, freqs, mag


@dataclass(frozen=True)
class EventDetectorConfig:
    frame_len_s: float = 0.05
    energy_threshold_factor: float = 3.0  # k, multiple of the noise floor
    min_event_s: float = 0.1
    min_gap_s: float = 0.3
    noise_floor_s: Optional[float] = None  # None -> estimate over all frames

    def validate(self) -> None:
        if self.energy_threshold_factor <= 1:
            raise ValueError("energy_threshold_factor must be > 1")
        for name in ("frame_len_s", "min_event_s", "min_gap_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DetectedEvent:
    start_s: float
    end_s: float
    peak_energy: float
    snr_db: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def frame_energies(samples: np.ndarray, rate_hz: float, frame_len_s: float) -> np.ndarray:
    """Mean-square energy per non-overlapping frame."""
    x = np.asarray(samples, dtype=np.float64)
    flen = max(1, int(round(frame_len_s * rate_hz)))
    n_frames = len(x) // flen
    if n_frames == 0:
        return np.empty(0)
    return (x[: n_frames * flen].reshape(n_frames, flen) ** 2).mean(axis=1)


def detect_events(
    samples: np.ndarray, rate_hz: float, config: Optional[EventDetectorConfig] = None
) -> List[DetectedEvent]:
    config = config or EventDetectorConfig()
    config.validate()
    energies = frame_energies(samples, rate_hz, config.frame_len_s)
    if len(energies) == 0:
        return []
    flen_s = max(1, int(round(config.frame_len_s * rate_hz))) / rate_hz
    if config.noise_floor_s is None:
        floor_frames = energies
    else:
        n_floor = max(1, int(round(config.noise_floor_s / flen_s)))
        if n_floor > len(energies):
            raise ValueError("not enough leading data for the noise-floor window")
        floor_frames = energies[:n_floor]
    floor = float(np.median(floor_frames))
    if floor <= 0:
        floor = float(np.finfo(np.float64).tiny)

    active = energies > config.energy_threshold_factor * floor
    # runs of active frames
    runs: List[Tuple[int, int]] = []  # [start, end) in frames
    start = None
    for i, flag in enumerate(active):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(active)))

    # merge runs separated by less than min_gap
    min_gap_frames = max(1, int(round(config.min_gap_s / flen_s)))
    merged: List[Tuple[int, int]] = []
    for run in runs:
        if merged and run[0] - merged[-1][1] < min_gap_frames:
            merged[-1] = (merged[-1][0], run[1])
        else:
            merged.append(run)

    events = []
    for s, e in merged:
        if (e - s) * flen_s < config.min_event_s:
            continue
        seg = energies[s:e]
        events.append(
            DetectedEvent(
                start_s=s * flen_s,
                end_s=e * flen_s,
                peak_energy=float(seg.max()),
                snr_db=10.0 * math.log10(float(seg.mean()) / floor),
            )
        )
    return events


def snr_db(
    signal: np.ndarray,
    noise: np.ndarray,
    signal_duration_s: Optional[float] = None,
    noise_duration_s: Optional[float] = None,
) -> float:
    """Duration-normalized energy ratio in dB.

    Durations default to the sample counts, which is exact whenever both
    segments share a sampling rate. Zero noise energy yields +inf.
    """
    sig = np.asarray(signal, dtype=np.float64)
    noi = np.asarray(noise, dtype=np.float64)
    if sig.size == 0 or noi.size == 0:
        raise ValueError("signal and noise must be non-empty")
    t_sig = signal_duration_s if signal_duration_s is not None else float(sig.size)
    t_noi = noise_duration_s if noise_duration_s is not None else float(noi.size)
    if t_sig <= 0 or t_noi <= 0:
        raise ValueError("durations must be positive")
    e_sig = float(np.dot(sig, sig))
    e_noi = float(np.dot(noi, noi))
    if e_noi == 0.0:
        return math.inf
    return 10.0 * math.log10((e_sig / t_sig) / (e_noi / t_noi))


def fft_features(event_samples: np.ndarray, rate_hz: float, n_bins: int = 32) -> np.ndarray:
    """L2-normalized band magnitudes over [10, 1000] Hz in n_bins bands."""
    x = np.asarray(event_samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("event_samples must be non-empty")
    power = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate_hz)
    edges = np.linspace(BAND_LOW_HZ, BAND_HIGH_HZ, n_bins + 1)
    idx = np.searchsorted(edges, freqs, side="right") - 1
    valid = (idx >= 0) & (idx < n_bins) & (freqs >= BAND_LOW_HZ) & (freqs <= BAND_HIGH_HZ)
    bands = np.zeros(n_bins)
    np.add.at(bands, idx[valid], power[valid])
    feat = np.sqrt(bands)
    norm = np.linalg.norm(feat)
    return feat / norm if norm > 0 else feat


def bucketed_snr_series(
    samples: np.ndarray,
    rate_hz: float,
    bucket_s: float,
    floor_quantile: float = 0.1,
) -> np.ndarray:
    """Per-bucket SNR in dB against a quiet-bucket noise floor.

    The floor is the `floor_quantile` quantile of bucket energies, i.e. the
    ambient level of the quietest buckets.
    """
    energies = frame_energies(samples, rate_hz, bucket_s)
    if len(energies) == 0:
        return np.empty(0)
    floor = float(np.quantile(energies, floor_quantile))
    floor = max(floor, float(np.finfo(np.float64).tiny))
    return 10.0 * np.log10(np.maximum(energies, floor * 1e-12) / floor)


def min_max_normalize(series: np.ndarray) -> np.ndarray:
    lo, hi = float(np.min(series)), float(np.max(series))
    if hi == lo:
        return np.zeros_like(series)
    return (series - lo) / (hi - lo)


def circular_autocorrelation(series: np.ndarray) -> np.ndarray:
    """Normalized circular autocorrelation of a mean-removed series."""
    x = np.asarray(series, dtype=np.float64)
    x = x - x.mean()
    spec = np.fft.rfft(x)
    ac = np.fft.irfft(spec * np.conj(spec), n=len(x))
    if ac[0] <= 0:
        return np.zeros_like(ac)
    return ac / ac[0]


def dominant_period(series: np.ndarray) -> int:
    """Lag (1..n//2) with the highest circular autocorrelation."""
    ac = circular_autocorrelation(series)
    half = len(ac) // 2
    if half < 1:
        return 0
    return int(np.argmax(ac[1 : half + 1]) + 1)
