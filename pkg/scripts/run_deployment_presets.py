#!/usr/bin/env python3
"""Run the three deployment clock presets and print the hub-measured
sampling-rate statistics side by side."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vibesense import runner, scenario  # noqa: E402

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> int:
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
    print(f"{'preset':<14} {'rate mean (Hz)':>15} {'rate std (Hz)':>14} {'loss %':>7}")
    for name in ("deployment1", "deployment2", "deployment3"):
        scn = scenario.load_scenario(SCENARIOS / f"{name}.json")
        report = runner.run_scenario(scn, out_root / name)
        dev = report.devices[0]
        print(
            f"{name:<14} {dev.rate_mean_hz:>15.1f} {dev.rate_std_hz:>14.1f} "
            f"{dev.loss_pct:>7.2f}"
        )
    print(f"\nartifacts under {out_root}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
