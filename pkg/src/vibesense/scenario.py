"""Declarative run configuration.

A scenario JSON names the devices (clock preset or explicit model, noise,
activity script), the channel impairments, hub settings, and a mandatory
seed. Script presets:

    {"preset": "activity_mix"}                          one of each activity
    {"preset": "daily_pattern", "days": 7,
     "seconds_per_hour": 2.0}                           compressed week, the
                                                        same pattern each day

The daily pattern maps every scenario hour onto a short synthesis bucket
(`seconds_per_hour`), so a 7-day scenario stays desk-scale while keeping a
24-bucket daily period for the weekly SNR analysis.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .devicesim import (
    CLOCK_PRESETS,
    ActivityKind,
    ActivityScript,
    ClockModel,
    NoiseModel,
    ScriptEntry,
)
from .netsim import ChannelConfig


class ScenarioError(ValueError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


def activity_mix_script(duration_s: float) -> ActivityScript:
    """One scripted pass through every activity kind, idle in between."""
    if duration_s < 5:
        raise ValueError("activity_mix needs at least 5 s")
    u = duration_s / 60.0  # layout defined on a 60 s grid, scaled
    entries = (
        ScriptEntry(4 * u, 6 * u, ActivityKind.FOOTSTEP, 1.0),
        ScriptEntry(14 * u, 2 * u, ActivityKind.DOOR, 1.0),
        ScriptEntry(20 * u, 3 * u, ActivityKind.OBJECT_PLACE, 0.9),
        ScriptEntry(28 * u, 4 * u, ActivityKind.MEDICATION_SHAKE, 0.8),
        ScriptEntry(38 * u, 10 * u, ActivityKind.SHOWER, 0.7),
        ScriptEntry(52 * u, 5 * u, ActivityKind.FOOTSTEP, 1.0),
    )
    return ActivityScript(entries)


# (hour, kind, amplitude) of the repeating day used by daily_pattern
_DAILY_LAYOUT: Tuple[Tuple[int, ActivityKind, float], ...] = (
    (7, ActivityKind.MEDICATION_SHAKE, 0.9),
    (8, ActivityKind.SHOWER, 0.8),
    (9, ActivityKind.FOOTSTEP, 1.0),
    (12, ActivityKind.OBJECT_PLACE, 0.9),
    (13, ActivityKind.FOOTSTEP, 0.9),
    (18, ActivityKind.DOOR, 1.0),
    (19, ActivityKind.FOOTSTEP, 1.0),
    (21, ActivityKind.MEDICATION_SHAKE, 0.9),
)


def daily_pattern_script(days: int, seconds_per_hour: float) -> ActivityScript:
    """The same daily activity layout repeated for `days` days, compressed so
    each hour occupies `seconds_per_hour` seconds of synthesis."""
    if days < 1:
        raise ValueError("days must be >= 1")
    if seconds_per_hour < 1.0:
        raise ValueError("seconds_per_hour must be >= 1")
    entries: List[ScriptEntry] = []
    burst = min(0.6 * seconds_per_hour, 2.0)
    for day in range(days):
        for hour, kind, amp in _DAILY_LAYOUT:
            start = (day * 24 + hour) * seconds_per_hour + 0.2 * seconds_per_hour
            entries.append(ScriptEntry(start, burst, kind, amp))
    return ActivityScript(tuple(entries))


@dataclass
class ScenarioDevice:
    device_id: int
    clock: ClockModel
    noise: NoiseModel
    script: ActivityScript
    clock_preset: Optional[str] = None


@dataclass
class Scenario:
    seed: int
    duration_s: float
    devices: List[ScenarioDevice]
    channel: ChannelConfig
    hub: Dict[str, int] = field(default_factory=dict)
    seconds_per_hour: Optional[float] = None  # set by daily_pattern scripts
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_script(spec, duration_s: float, loc: str) -> Tuple[ActivityScript, Optional[float], Optional[float]]:
    """Returns (script, implied duration override, seconds_per_hour)."""
    if isinstance(spec, list):
        entries = []
        for i, e in enumerate(spec):
            try:
                entries.append(
                    ScriptEntry(
                        start_s=float(e["start_s"]),
                        duration_s=float(e["duration_s"]),
                        kind=ActivityKind(e["kind"]),
                        amplitude=float(e.get("amplitude", 1.0)),
                        center_freqs_hz=tuple(e.get("center_freqs_hz", ())),
                    )
                )
            except (KeyError, ValueError) as err:
                raise ScenarioError(f"{loc}[{i}]", str(err)) from err
        return ActivityScript(tuple(entries)), None, None
    if isinstance(spec, dict) and "preset" in spec:
        name = spec["preset"]
        if name == "activity_mix":
            return activity_mix_script(duration_s), None, None
        if name == "daily_pattern":
            days = int(spec.get("days", 7))
            sph = float(spec.get("seconds_per_hour", 2.0))
            return daily_pattern_script(days, sph), days * 24 * sph, sph
        raise ScenarioError(loc, f"unknown script preset '{name}'")
    raise ScenarioError(loc, "script must be an entry list or a preset object")


def _parse_clock(spec, loc: str) -> Tuple[ClockModel, Optional[str]]:
    if isinstance(spec, str):
        if spec not in CLOCK_PRESETS:
            raise ScenarioError(
                loc, f"unknown clock preset '{spec}' (have: {sorted(CLOCK_PRESETS)})"
            )
        return CLOCK_PRESETS[spec], spec
    if isinstance(spec, dict):
        try:
            clock = ClockModel(
                nominal_rate_hz=float(spec.get("nominal_rate_hz", 7000.0)),
                rate_std_hz=float(spec.get("rate_std_hz", 0.0)),
                sync_enabled=bool(spec.get("sync_enabled", False)),
                drift_ppm=float(spec.get("drift_ppm", 0.0)),
            )
            clock.validate()
            return clock, None
        except ValueError as err:
            raise ScenarioError(loc, str(err)) from err
    raise ScenarioError(loc, "clock must be a preset name or an object")


def load_scenario(path: "Path | str") -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ScenarioError(str(path), f"invalid JSON: {err}") from err
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> Scenario:
    if "seed" not in raw:
        raise ScenarioError("seed", "scenario seed is mandatory")
    seed = int(raw["seed"])
    duration_s = float(raw.get("duration_s", 60.0))
    try:
        channel = ChannelConfig.from_dict(raw.get("channel", {}))
    except (TypeError, ValueError) as err:
        raise ScenarioError("channel", str(err)) from err

    devices: List[ScenarioDevice] = []
    seconds_per_hour = None
    dev_specs = raw.get("devices")
    if not dev_specs:
        raise ScenarioError("devices", "at least one device required")
    seen_ids = set()
    for i, spec in enumerate(dev_specs):
        loc = f"devices[{i}]"
        dev_id = int(spec.get("device_id", i + 1))
        if dev_id in seen_ids:
            raise ScenarioError(loc, f"duplicate device_id {dev_id}")
        seen_ids.add(dev_id)
        clock, preset = _parse_clock(spec.get("clock", "deployment3"), f"{loc}.clock")
        noise_spec = spec.get("noise", {})
        noise = NoiseModel(
            ambient_std=float(noise_spec.get("ambient_std", 0.002)),
            powerline_hz=noise_spec.get("powerline_hz"),
            powerline_amp=float(noise_spec.get("powerline_amp", 0.0)),
        )
        try:
            noise.validate()
        except ValueError as err:
            raise ScenarioError(f"{loc}.noise", str(err)) from err
        script, dur_override, sph = _parse_script(
            spec.get("script", {"preset": "activity_mix"}), duration_s, f"{loc}.script"
        )
        if dur_override is not None:
            duration_s = max(duration_s, dur_override)
        if sph is not None:
            seconds_per_hour = sph
        try:
            script.validate()
        except ValueError as err:
            raise ScenarioError(f"{loc}.script", str(err)) from err
        devices.append(ScenarioDevice(dev_id, clock, noise, script, preset))

    hub_spec = raw.get("hub", {})
    return Scenario(
        seed=seed,
        duration_s=duration_s,
        devices=devices,
        channel=channel,
        hub={k: int(v) for k, v in hub_spec.items()},
        seconds_per_hour=seconds_per_hour,
        raw=raw,
    )
