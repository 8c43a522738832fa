#!/usr/bin/env python3
"""Replay a scripted caregiver dialog against the fixture home and print the
ranked placement cards (uses the LLM endpoint when configured, otherwise the
deterministic expert)."""

import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from vibesense.recommend import DialogEngine, SensorSpec, parse_environment  # noqa: E402
from vibesense.recommend.llmclient import LLMClient  # noqa: E402

HOME = """
room kitchen
room living
adjacent kitchen living
surface counter in kitchen material=wood visibility=1.0
surface sideboard in kitchen material=wood visibility=0.3
surface shelf in living material=wood visibility=0.0
outlet k1 in kitchen
outlet l1 in living
reach k1 counter 1.5
reach k1 sideboard 1.5
reach l1 shelf 1.5
object pillbox on counter tag=medication
"""

ANSWERS = ["1", "yes", "medication_shake", "yes", "accept"]


def main() -> int:
    engine = DialogEngine(
        parse_environment(HOME), SensorSpec(), llm=LLMClient.from_env(os.environ)
    )
    state, output = engine.start()
    print(f"agent: {output.text}")
    for answer in ANSWERS:
        print(f"user:  {answer}")
        state, output = engine.step(state, answer)
        for rec in output.recommendations:
            print(
                f"       [{rec.placement.placement_id}] perf={rec.perf_score:.2f} "
                f"ux={rec.ux_score:.2f} total={rec.total:.3f}"
            )
        print(f"agent: {output.text}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
