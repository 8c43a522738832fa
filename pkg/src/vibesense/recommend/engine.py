"""Candidate generation, scoring, selection, and the dialog state machine.

The dialog follows three steps: gather preferences until every required
field is answered (the sufficiency gate), then generate and score feasible
placements, then present them ranked by the equally weighted mean of the
sensing-performance and user-experience scores. An external LLM client may
phrase questions and propose scored placements, but its output passes the
same feasibility checks and score clamps as the rule-based expert; on any
client failure the engine degrades to the expert and flags it in the
transcript.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from ..devicesim import ACTIVITY_4MS, ActivityKind
from . import llmclient
from .rules import DEFAULT_RULES, ScoringRules
from .schema import EnvironmentGraph, SensorSpec, serialize_environment

REQUIRED_FIELDS = (
    "privacy_concern",
    "tamper_risk",
    "target_activities",
    "discretion_required",
)

SELECTABLE_ACTIVITIES = tuple(
    k.value for k in ActivityKind if k is not ActivityKind.IDLE
)


@dataclass
class UserPreferences:
    privacy_concern: Optional[int] = None  # 1 (low) .. 5 (high)
    tamper_risk: Optional[bool] = None
    target_activities: Optional[Tuple[str, ...]] = None
    discretion_required: Optional[bool] = None

    def missing_fields(self) -> Tuple[str, ...]:
        return tuple(f for f in REQUIRED_FIELDS if getattr(self, f) is None)

    @property
    def sufficient(self) -> bool:
        return not self.missing_fields()

    def validate(self) -> None:
        if self.privacy_concern is not None and not 1 <= self.privacy_concern <= 5:
            raise ValueError("privacy_concern must be in 1..5")
        for kind in self.target_activities or ():
            if kind not in SELECTABLE_ACTIVITIES:
                raise ValueError(f"unknown activity kind '{kind}'")

    def to_dict(self) -> dict:
        return {
            "privacy_concern": self.privacy_concern,
            "tamper_risk": self.tamper_risk,
            "target_activities": list(self.target_activities)
            if self.target_activities is not None
            else None,
            "discretion_required": self.discretion_required,
        }


@dataclass(frozen=True)
class Placement:
    surface_id: str
    outlet_id: str
    gain: int
    orientation: str = "upright"

    @property
    def placement_id(self) -> str:
        return f"{self.surface_id}:{self.outlet_id}:g{self.gain}"


@dataclass
class Recommendation:
    placement: Placement
    perf_score: float
    ux_score: float
    rationale: str = ""
    total: float = field(init=False)

    def __post_init__(self) -> None:
        self.perf_score = min(1.0, max(0.0, float(self.perf_score)))
        self.ux_score = min(1.0, max(0.0, float(self.ux_score)))
        self.total = (self.perf_score + self.ux_score) / 2.0

    def to_dict(self) -> dict:
        return {
            "surface": self.placement.surface_id,
            "outlet": self.placement.outlet_id,
            "gain": self.placement.gain,
            "orientation": self.placement.orientation,
            "placement_id": self.placement.placement_id,
            "perf_score": self.perf_score,
            "ux_score": self.ux_score,
            "total": self.total,
            "rationale": self.rationale,
        }


# -- feasibility and enumeration ----------------------------------------------


def is_feasible(
    placement: Placement,
    graph: EnvironmentGraph,
    sensor: SensorSpec,
    rules: ScoringRules = DEFAULT_RULES,
) -> Tuple[bool, Optional[str]]:
    surface = graph.surfaces.get(placement.surface_id)
    if surface is None:
        return False, "unknown_surface"
    if placement.outlet_id not in graph.outlets:
        return False, "unknown_outlet"
    if placement.gain not in sensor.gain_options:
        return False, "unknown_gain"
    reach = graph.reaches.get((placement.outlet_id, placement.surface_id))
    if reach is None:
        return False, "no_reach"
    if reach > sensor.max_cable_m:
        return False, "cable_reach"
    if sensor.upright_required and not rules.supports_upright(surface.material):
        return False, "not_upright"
    return True, None


@dataclass
class CandidateResult:
    placements: List[Placement]
    rejected: Dict[str, int]

    @property
    def empty_reason(self) -> Optional[str]:
        if self.placements:
            return None
        if not self.rejected:
            return "no surface/outlet pairs declared"
        return max(self.rejected.items(), key=lambda kv: kv[1])[0]


def generate_candidates(
    graph: EnvironmentGraph,
    sensor: SensorSpec,
    rules: ScoringRules = DEFAULT_RULES,
) -> CandidateResult:
    """Exhaustive, duplicate-free cross of feasible (surface, outlet, gain)."""
    sensor.validate()
    placements: List[Placement] = []
    rejected: Dict[str, int] = {}
    for surface_id in sorted(graph.surfaces):
        for outlet_id in sorted(graph.outlets):
            for gain in sensor.gain_options:
                cand = Placement(surface_id, outlet_id, gain)
                ok, reason = is_feasible(cand, graph, sensor, rules)
                if ok:
                    placements.append(cand)
                else:
                    rejected[reason] = rejected.get(reason, 0) + 1
    return CandidateResult(placements, rejected)


# -- scoring -------------------------------------------------------------------


def _proximity(
    placement: Placement,
    graph: EnvironmentGraph,
    target_activities: Tuple[str, ...],
    rules: ScoringRules,
    script_profile: Optional[Dict[str, float]],
) -> float:
    if not target_activities:
        return rules.no_target_proximity
    surface = graph.surfaces[placement.surface_id]
    total_weight = 0.0
    acc = 0.0
    for kind in target_activities:
        weight = (script_profile or {}).get(kind, 1.0)
        tag = ACTIVITY_4MS[ActivityKind(kind)]
        best = None
        for obj_id in sorted(graph.objects):
            obj = graph.objects[obj_id]
            if obj.tag != tag:
                continue
            if obj.surface == placement.surface_id:
                hops = 0
            else:
                obj_room = graph.surfaces[obj.surface].room
                dist = graph.room_distance(surface.room, obj_room)
                hops = None if dist is None else 1 + dist
            score = 0.0 if hops is None else rules.hop_decay ** hops
            best = score if best is None else max(best, score)
        if best is None:
            best = rules.no_target_proximity  # activity has no locatable object
        acc += weight * best
        total_weight += weight
    return acc / total_weight if total_weight else rules.no_target_proximity


def _headroom(gain: int, options: Tuple[int, ...]) -> float:
    idx = options.index(gain)
    if len(options) == 1:
        return 1.0
    middle = (len(options) - 1) / 2.0
    return 1.0 - abs(idx - middle) / (len(options) - 1)


def _ux_score(
    placement: Placement,
    prefs: UserPreferences,
    graph: EnvironmentGraph,
    rules: ScoringRules,
) -> float:
    surface = graph.surfaces[placement.surface_id]
    vis_pen = surface.visibility * (
        rules.tamper_visibility_weight * bool(prefs.tamper_risk)
        + rules.discretion_visibility_weight * bool(prefs.discretion_required)
    )
    priv_pen = (
        rules.privacy_weight
        * ((prefs.privacy_concern or 1) - 1)
        / 4.0
        * rules.sensitivity(surface.room)
    )
    return min(1.0, max(0.0, 1.0 - vis_pen - priv_pen))


def score_candidate(
    placement: Placement,
    prefs: UserPreferences,
    graph: EnvironmentGraph,
    sensor: SensorSpec,
    script_profile: Optional[Dict[str, float]] = None,
    rules: ScoringRules = DEFAULT_RULES,
) -> Tuple[float, float]:
    """Deterministic (perf, ux) pair per the rule tables; both in [0, 1]."""
    prefs.validate()
    surface = graph.surfaces[placement.surface_id]
    proximity = _proximity(
        placement, graph, prefs.target_activities or (), rules, script_profile
    )
    coupling = rules.coupling(surface.material)
    headroom = _headroom(placement.gain, sensor.gain_options)
    perf = proximity * coupling * (
        rules.headroom_floor + (1.0 - rules.headroom_floor) * headroom
    )
    return min(1.0, max(0.0, perf)), _ux_score(placement, prefs, graph, rules)


def _rationale(
    placement: Placement,
    graph: EnvironmentGraph,
    prefs: UserPreferences,
    perf: float,
    ux: float,
    source: str,
) -> str:
    surface = graph.surfaces[placement.surface_id]
    bits = [
        f"{surface.material} surface '{surface.id}' in {surface.room}",
        f"outlet '{placement.outlet_id}' within cable reach",
        f"gain {placement.gain}",
    ]
    if prefs.tamper_risk or prefs.discretion_required:
        vis = "low" if surface.visibility <= 0.3 else (
            "medium" if surface.visibility <= 0.7 else "high"
        )
        bits.append(f"{vis} visibility (discretion matters here)")
    bits.append(f"perf {perf:.2f} / ux {ux:.2f} [{source}]")
    return "; ".join(bits)


def select(recommendations: List[Recommendation]) -> List[Recommendation]:
    """Rank by total descending; ties break on the placement identifier."""
    if not recommendations:
        raise ValueError("cannot select from an empty recommendation list")
    return sorted(recommendations, key=lambda r: (-r.total, r.placement.placement_id))


# -- dialog --------------------------------------------------------------------


class Phase(Enum):
    GATHER_INFO = "gather_info"
    GENERATE = "generate"
    SCORE = "score"
    PRESENT = "present"
    DONE = "done"


@dataclass
class TranscriptTurn:
    role: str  # "user" | "agent" | "system"
    text: str

    def to_dict(self) -> dict:
        return {"role": self.role, "text": self.text}


@dataclass
class AgentOutput:
    kind: str  # "question" | "recommendations" | "message" | "done"
    text: str = ""
    field_name: Optional[str] = None
    recommendations: List[Recommendation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "text": self.text,
            "field": self.field_name,
            "recommendations": [r.to_dict() for r in self.recommendations],
        }


@dataclass
class DialogState:
    phase: Phase = Phase.GATHER_INFO
    prefs: UserPreferences = field(default_factory=UserPreferences)
    transcript: List[TranscriptTurn] = field(default_factory=list)
    pending_field: Optional[str] = None
    pending_question: Optional[str] = None
    ranked: List[Recommendation] = field(default_factory=list)
    presented: int = 0
    selected: Optional[Recommendation] = None


FALLBACK_QUESTIONS: Dict[str, str] = {
    "privacy_concern": (
        "On a scale from 1 (low) to 5 (high), how concerned is the household "
        "about privacy?"
    ),
    "tamper_risk": (
        "Does the resident have memory or cognitive changes that might lead "
        "to moving or unplugging an unfamiliar device? (yes/no)"
    ),
    "target_activities": (
        "Which activities should the system monitor? Choose from: "
        + ", ".join(SELECTABLE_ACTIVITIES)
        + "."
    ),
    "discretion_required": (
        "Should the sensors stay out of sight of the resident and visitors? "
        "(yes/no)"
    ),
}

_YES = {"yes", "y", "true", "1", "yeah", "sure"}
_NO = {"no", "n", "false", "0", "nope"}


def _parse_answer(field_name: str, message: str) -> Optional[object]:
    text = message.strip().lower()
    if field_name == "privacy_concern":
        match = re.search(r"\b([1-5])\b", text)
        return int(match.group(1)) if match else None
    if field_name in ("tamper_risk", "discretion_required"):
        words = set(re.findall(r"[a-z0-9]+", text))
        if words & _YES:
            return True
        if words & _NO:
            return False
        return None
    if field_name == "target_activities":
        tokens = re.findall(r"[a-z_]+", text)
        chosen = tuple(t for t in tokens if t in SELECTABLE_ACTIVITIES)
        return chosen or None
    raise ValueError(f"unknown preference field '{field_name}'")


class DialogEngine:
    """Owns one environment + sensor context; sessions are independent."""

    def __init__(
        self,
        graph: EnvironmentGraph,
        sensor: SensorSpec,
        rules: ScoringRules = DEFAULT_RULES,
        llm: Optional["llmclient.LLMClient"] = None,
        n_present: int = 3,
        script_profile: Optional[Dict[str, float]] = None,
    ):
        problems = graph.validate()
        if problems:
            raise ValueError("invalid environment graph: " + "; ".join(problems))
        sensor.validate()
        self.graph = graph
        self.sensor = sensor
        self.rules = rules
        self.llm = llm
        self.n_present = n_present
        self.script_profile = script_profile

    # -- agent turns ------------------------------------------------------

    def start(self) -> Tuple[DialogState, AgentOutput]:
        state = DialogState()
        output = self._ask_next(state)
        return state, output

    def step(self, state: DialogState, user_message: str) -> Tuple[DialogState, AgentOutput]:
        if state.phase is Phase.DONE:
            raise ValueError("dialog already finished")
        state.transcript.append(TranscriptTurn("user", user_message))
        if state.phase is Phase.GATHER_INFO:
            output = self._gather(state, user_message)
        else:  # PRESENT
            output = self._present_commands(state, user_message)
        return state, output

    # -- gather phase -------------------------------------------------------

    def _gather(self, state: DialogState, message: str) -> AgentOutput:
        if state.pending_field is not None:
            value = _parse_answer(state.pending_field, message)
            if value is None:
                retry = (
                    "Sorry, I could not read that. "
                    + FALLBACK_QUESTIONS[state.pending_field]
                )
                state.pending_question = retry
                state.transcript.append(TranscriptTurn("agent", retry))
                return AgentOutput("question", retry, state.pending_field)
            setattr(state.prefs, state.pending_field, value)
            state.pending_field = None
            state.pending_question = None
        if state.prefs.sufficient:
            return self._generate_and_present(state)
        return self._ask_next(state)

    def _ask_next(self, state: DialogState) -> AgentOutput:
        missing = state.prefs.missing_fields()
        field_name = missing[0]
        question = FALLBACK_QUESTIONS[field_name]
        if self.llm is not None:
            try:
                action = llmclient.parse_agent_output(
                    self.llm.complete(*self._prompt(state, "ask"))
                )
                if (
                    isinstance(action, llmclient.AskAction)
                    and action.field in missing
                ):
                    field_name, question = action.field, action.question
                else:
                    self._flag(state, "llm output rejected (not a valid question); using fallback expert")
            except llmclient.LLMError as err:
                self._flag(state, f"llm unavailable ({err}); using fallback expert")
        state.pending_field = field_name
        state.pending_question = question
        state.transcript.append(TranscriptTurn("agent", question))
        return AgentOutput("question", question, field_name)

    # -- generate / score / present ------------------------------------------

    def _generate_and_present(self, state: DialogState) -> AgentOutput:
        assert state.prefs.sufficient, "sufficiency gate violated"
        state.phase = Phase.GENERATE
        candidates = generate_candidates(self.graph, self.sensor, self.rules)
        if not candidates.placements:
            state.phase = Phase.DONE
            text = (
                "No feasible placement exists in this home "
                f"(dominant constraint: {candidates.empty_reason}; "
                f"rejections: {candidates.rejected})."
            )
            state.transcript.append(TranscriptTurn("agent", text))
            return AgentOutput("message", text)

        state.phase = Phase.SCORE
        recs = None
        if self.llm is not None:
            recs = self._llm_recommendations(state, candidates)
        if recs is None:
            recs = self._expert_recommendations(state, candidates)
        state.ranked = select(recs)
        state.phase = Phase.PRESENT
        return self._present_batch(state, reset=True)

    def _expert_recommendations(
        self, state: DialogState, candidates: CandidateResult
    ) -> List[Recommendation]:
        recs = []
        for placement in candidates.placements:
            perf, ux = score_candidate(
                placement,
                state.prefs,
                self.graph,
                self.sensor,
                self.script_profile,
                self.rules,
            )
            recs.append(
                Recommendation(
                    placement,
                    perf,
                    ux,
                    _rationale(placement, self.graph, state.prefs, perf, ux, "expert"),
                )
            )
        return recs

    def _llm_recommendations(
        self, state: DialogState, candidates: CandidateResult
    ) -> Optional[List[Recommendation]]:
        try:
            action = llmclient.parse_agent_output(
                self.llm.complete(*self._prompt(state, "recommend"))
            )
        except llmclient.LLMError as err:
            self._flag(state, f"llm unavailable ({err}); using fallback expert")
            return None
        if not isinstance(action, llmclient.RecommendAction):
            self._flag(state, "llm output rejected (expected recommendations); using fallback expert")
            return None
        recs = []
        for item in action.items:
            placement = Placement(item.surface, item.outlet, item.gain)
            ok, reason = is_feasible(placement, self.graph, self.sensor, self.rules)
            if not ok:
                self._flag(
                    state,
                    f"rejected infeasible llm suggestion {placement.placement_id} ({reason})",
                )
                continue
            recs.append(
                Recommendation(
                    placement,
                    item.perf,
                    item.ux,
                    _rationale(
                        placement, self.graph, state.prefs, item.perf, item.ux, "llm"
                    ),
                )
            )
        if not recs:
            self._flag(state, "no feasible llm suggestions; using fallback expert")
            return None
        return recs

    def _present_batch(self, state: DialogState, reset: bool = False) -> AgentOutput:
        if reset:
            state.presented = 0
        batch = state.ranked[state.presented : state.presented + self.n_present]
        if not batch:  # exhausted: re-show the final batch
            state.presented = max(0, state.presented - self.n_present)
            batch = state.ranked[state.presented : state.presented + self.n_present]
            text = "No further candidates; showing the last batch again."
        else:
            state.presented += len(batch)
            text = (
                f"Top placements {state.presented - len(batch) + 1}"
                f"-{state.presented} of {len(state.ranked)} "
                "(reply 'accept', 'accept <placement_id>', or 'alternatives')."
            )
        state.transcript.append(TranscriptTurn("agent", text))
        return AgentOutput("recommendations", text, recommendations=batch)

    def _present_commands(self, state: DialogState, message: str) -> AgentOutput:
        text = message.strip().lower()
        if text.startswith("accept"):
            chosen = state.ranked[0]
            parts = message.strip().split()
            if len(parts) > 1:
                wanted = parts[1]
                match = [r for r in state.ranked if r.placement.placement_id == wanted]
                if not match:
                    reply = f"No candidate has id '{wanted}'; reply 'accept' for the top one."
                    state.transcript.append(TranscriptTurn("agent", reply))
                    return AgentOutput("message", reply)
                chosen = match[0]
            state.selected = chosen
            state.phase = Phase.DONE
            reply = (
                f"Deploy on '{chosen.placement.surface_id}' powered from "
                f"'{chosen.placement.outlet_id}' at gain {chosen.placement.gain}."
            )
            state.transcript.append(TranscriptTurn("agent", reply))
            return AgentOutput("done", reply, recommendations=[chosen])
        if text in ("alternatives", "more", "next"):
            return self._present_batch(state)
        return self._present_batch(state, reset=True)

    # -- plumbing -------------------------------------------------------------

    def _flag(self, state: DialogState, note: str) -> None:
        state.transcript.append(TranscriptTurn("system", note))

    def _prompt(self, state: DialogState, mode: str) -> Tuple[str, List[dict]]:
        system = llmclient.render_prompt(
            schema=serialize_environment(self.graph),
            sensor=self.sensor.to_dict(),
            preferences=state.prefs.to_dict(),
            missing=list(state.prefs.missing_fields()),
            mode=mode,
        )
        messages = [
            {"role": "user" if t.role == "user" else "assistant", "content": t.text}
            for t in state.transcript
            if t.role in ("user", "agent")
        ]
        return system, messages
