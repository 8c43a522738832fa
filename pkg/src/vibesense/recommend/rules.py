"""Versioned rule tables behind the deterministic placement scorer.

Both score paths (expert fallback and the external LLM client) pass through
the same clamp-and-validate layer, so these tables fully specify the
fallback's behavior.

Sensing-performance model (monotone in every factor):

    proximity  = weighted mean over target objects of hop_decay ** hops
                 where hops = 0 on the same surface, else 1 + room BFS hops
    coupling   = material_coupling[surface.material]
    headroom   = 1 - |gain_index - middle_index| / (len(gains) - 1)
    perf       = clamp01(proximity * coupling * (headroom_floor + (1 - headroom_floor) * headroom))

User-experience model (penalties, higher is better):

    visibility_penalty = visibility * (tamper_visibility_weight * tamper_risk
                                       + discretion_visibility_weight * discretion_required)
    privacy_penalty    = privacy_weight * (privacy_concern - 1) / 4 * room_sensitivity
    ux                 = clamp01(1 - visibility_penalty - privacy_penalty)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet

RULES_VERSION = 1


def _default_coupling() -> Dict[str, float]:
    return {
        "wood": 1.0,
        "metal": 0.9,
        "tile": 0.85,
        "laminate": 0.8,
        "stone": 0.75,
        "concrete": 0.7,
        "glass": 0.6,
        "carpet": 0.35,
        "fabric": 0.3,
    }


def _default_sensitivity() -> Dict[str, float]:
    return {
        "bedroom": 1.0,
        "bathroom": 1.0,
        "office": 0.6,
        "living": 0.5,
        "dining": 0.4,
        "kitchen": 0.4,
        "hallway": 0.2,
    }


@dataclass(frozen=True)
class ScoringRules:
    version: int = RULES_VERSION
    material_coupling: Dict[str, float] = field(default_factory=_default_coupling)
    default_coupling: float = 0.5
    hop_decay: float = 0.6
    headroom_floor: float = 0.6
    no_target_proximity: float = 0.5
    tamper_visibility_weight: float = 0.35
    discretion_visibility_weight: float = 0.35
    privacy_weight: float = 0.3
    room_sensitivity: Dict[str, float] = field(default_factory=_default_sensitivity)
    default_room_sensitivity: float = 0.5
    upright_materials: FrozenSet[str] = frozenset(
        {"wood", "metal", "tile", "laminate", "stone", "concrete", "glass"}
    )

    def coupling(self, material: str) -> float:
        return self.material_coupling.get(material, self.default_coupling)

    def sensitivity(self, room_id: str) -> float:
        low = room_id.lower()
        for key, value in self.room_sensitivity.items():
            if key in low:
                return value
        return self.default_room_sensitivity

    def supports_upright(self, material: str) -> bool:
        return material in self.upright_materials


DEFAULT_RULES = ScoringRules()
