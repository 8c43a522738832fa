"""Event windows and feature extraction shared by the analysis CLI, the
recognition training pipeline, and the test fixtures."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import devicesim, dsp, segments
from .devicesim import ActivityKind, ActivityScript, NoiseModel, ScriptEntry


def load_device_stream(run_dir: "Path | str", device_id: int) -> Tuple[np.ndarray, int, int]:
    """Concatenated index-aligned samples for one device from a run's
    segment files. Returns (samples, start_sample_index, nominal_rate)."""
    run = Path(run_dir)
    paths = sorted((run / "segments").glob(f"device{device_id:05d}_seg*.vseg"))
    if not paths:
        raise FileNotFoundError(f"no segments for device {device_id} under {run}")
    segs = [segments.read_segment(p) for p in paths]
    segs.sort(key=lambda s: s.start_sample_index)
    parts = [s.to_array(fill=0) for s in segs]
    return np.concatenate(parts), segs[0].start_sample_index, segs[0].nominal_rate_hz


def extract_event(
    stream: np.ndarray,
    stream_start_index: int,
    rate_hz: float,
    start_s: float,
    end_s: float,
) -> np.ndarray:
    lo = max(0, int(round(start_s * rate_hz)) - stream_start_index)
    hi = min(len(stream), int(round(end_s * rate_hz)) - stream_start_index)
    if hi <= lo:
        return np.empty(0, dtype=np.int32)
    return stream[lo:hi]


def event_frame_matrix(
    samples: np.ndarray,
    rate_hz: float,
    frame_len: int = 256,
    hop: int = 128,
    n_bins: int = 24,
    n_frames: int = 32,
) -> np.ndarray:
    """Fixed-size (n_bins, n_frames) matrix of per-frame band features.

    Short events are zero-padded on the right; long ones truncated.
    """
    x = np.asarray(samples, dtype=np.float64)
    needed = frame_len + (n_frames - 1) * hop
    if len(x) < needed:
        x = np.pad(x, (0, needed - len(x)))
    out = np.zeros((n_bins, n_frames))
    for f in range(n_frames):
        frame = x[f * hop : f * hop + frame_len]
        if np.any(frame):
            out[:, f] = dsp.fft_features(frame, rate_hz, n_bins)
    return out


@dataclass
class EventDataset:
    features: np.ndarray      # (n, d) spectral feature rows
    windows: np.ndarray       # (n, n_bins, n_frames) frame matrices
    labels: np.ndarray        # (n,) int class ids
    label_names: List[str]


def synth_event_dataset(
    counts: Dict[ActivityKind, int],
    seed: int,
    rate_hz: float = 7000.0,
    event_s: float = 1.0,
    ambient_std: float = 0.002,
    n_bins: int = 32,
    frame_bins: int = 24,
    n_frames: int = 32,
) -> EventDataset:
    """Synthesize labeled single-activity events straight from the device
    signal model (no network in the loop)."""
    label_names = [k.value for k in counts]
    feats: List[np.ndarray] = []
    wins: List[np.ndarray] = []
    labels: List[int] = []
    noise = NoiseModel(ambient_std=ambient_std)
    i = 0
    for cls, (kind, n) in enumerate(counts.items()):
        for _ in range(n):
            script = ActivityScript(
                (ScriptEntry(0.1, event_s - 0.2, kind, amplitude=1.0),)
            )
            sig = devicesim.synth_signal(script, noise, rate_hz, event_s, seed=seed + i)
            feats.append(dsp.fft_features(sig, rate_hz, n_bins))
            wins.append(event_frame_matrix(sig, rate_hz, n_bins=frame_bins, n_frames=n_frames))
            labels.append(cls)
            i += 1
    return EventDataset(
        features=np.stack(feats),
        windows=np.stack(wins),
        labels=np.asarray(labels, dtype=np.int64),
        label_names=label_names,
    )


def build_event_dataset(
    run_dir: "Path | str",
    n_bins: int = 32,
    frame_bins: int = 24,
    n_frames: int = 32,
) -> EventDataset:
    """Event features from a finished run: ground-truth intervals cut out of
    the stored segments."""
    run = Path(run_dir)
    truth = devicesim.read_truth_csv(run / "truth.csv")
    if not truth:
        raise ValueError(f"{run}/truth.csv has no events")
    streams: Dict[int, Tuple[np.ndarray, int, int]] = {}
    label_names = sorted({t.kind.value for t in truth})
    feats, wins, labels = [], [], []
    for ev in truth:
        if ev.device_id not in streams:
            streams[ev.device_id] = load_device_stream(run, ev.device_id)
        stream, start_idx, rate = streams[ev.device_id]
        rate = rate or 7000
        x = extract_event(stream, start_idx, rate, ev.start_s, ev.end_s)
        if len(x) == 0:
            continue
        feats.append(dsp.fft_features(x, rate, n_bins))
        wins.append(event_frame_matrix(x, rate, n_bins=frame_bins, n_frames=n_frames))
        labels.append(label_names.index(ev.kind.value))
    return EventDataset(
        features=np.stack(feats),
        windows=np.stack(wins),
        labels=np.asarray(labels, dtype=np.int64),
        label_names=label_names,
    )


def write_features_csv(path: "Path | str", dataset: EventDataset) -> None:
    d = dataset.features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(d)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            w.writerow([f"{v:.9g}" for v in row] + [dataset.label_names[label]])


def read_features_csv(path: "Path | str") -> Tuple[np.ndarray, List[str], List[str]]:
    """Returns (features, row labels, label names). A trailing 'label'
    column is optional."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    has_label = header and header[-1] == "label"
    data, labels = [], []
    for row in rows[1:]:
        if not row:
            continue
        if has_label:
            data.append([float(v) for v in row[:-1]])
            labels.append(row[-1])
        else:
            data.append([float(v) for v in row])
            labels.append("")
    names = sorted(set(labels) - {""})
    return np.asarray(data), labels, names
