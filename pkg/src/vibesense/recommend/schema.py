"""Typed environment graph and its line-oriented declarative document format.

Document grammar (one statement per line, ``#`` starts a comment)::

    room <id>
    surface <id> in <room> material=<word> visibility=<0..1>
    outlet <id> in <room>
    appliance <id> in <room>
    object <id> on <surface> tag=<mobility|medication|matters_most|mentation>
    reach <outlet> <surface> <meters>
    adjacent <roomA> <roomB>

Parsing collects every error (with its line number) before raising, so a
bad document reports all problems at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

FOUR_MS_TAGS = ("mobility", "medication", "matters_most", "mentation")


@dataclass(frozen=True)
class Room:
    id: str


@dataclass(frozen=True)
class Surface:
    id: str
    room: str
    material: str
    visibility: float


@dataclass(frozen=True)
class Outlet:
    id: str
    room: str


@dataclass(frozen=True)
class Appliance:
    id: str
    room: str


@dataclass(frozen=True)
class ObjectOfInterest:
    id: str
    surface: str
    tag: str


class EnvironmentParseError(ValueError):
    """All problems found in a document, each with its line number."""

    def __init__(self, errors: List[Tuple[int, str]]):
        self.errors = errors
        super().__init__(
            "; ".join(f"line {line}: {msg}" for line, msg in errors)
        )


@dataclass
class EnvironmentGraph:
    rooms: Dict[str, Room] = field(default_factory=dict)
    surfaces: Dict[str, Surface] = field(default_factory=dict)
    outlets: Dict[str, Outlet] = field(default_factory=dict)
    appliances: Dict[str, Appliance] = field(default_factory=dict)
    objects: Dict[str, ObjectOfInterest] = field(default_factory=dict)
    adjacency: Set[Tuple[str, str]] = field(default_factory=set)  # stored sorted
    reaches: Dict[Tuple[str, str], float] = field(default_factory=dict)  # (outlet, surface) -> m

    def add_adjacent(self, a: str, b: str) -> None:
        self.adjacency.add((min(a, b), max(a, b)))

    def neighbors(self, room: str) -> Set[str]:
        out = set()
        for a, b in self.adjacency:
            if a == room:
                out.add(b)
            elif b == room:
                out.add(a)
        return out

    def room_distance(self, a: str, b: str) -> Optional[int]:
        """BFS hop count over room adjacency; None when unreachable."""
        if a == b:
            return 0
        seen = {a}
        frontier = [a]
        dist = 0
        while frontier:
            dist += 1
            nxt = []
            for room in frontier:
                for n in self.neighbors(room):
                    if n == b:
                        return dist
                    if n not in seen:
                        seen.add(n)
                        nxt.append(n)
            frontier = nxt
        return None

    def rooms_connected(self) -> bool:
        if len(self.rooms) <= 1:
            return True
        start = next(iter(self.rooms))
        seen = {start}
        frontier = [start]
        while frontier:
            room = frontier.pop()
            for n in self.neighbors(room):
                if n not in seen:
                    seen.add(n)
                    frontier.append(n)
        return seen == set(self.rooms)

    def validate(self) -> List[str]:
        """Structural problems, empty when the graph is valid."""
        problems = []
        for s in self.surfaces.values():
            if s.room not in self.rooms:
                problems.append(f"surface '{s.id}' references undeclared room '{s.room}'")
            if not 0.0 <= s.visibility <= 1.0:
                problems.append(f"surface '{s.id}' visibility {s.visibility} outside [0, 1]")
        for o in self.outlets.values():
            if o.room not in self.rooms:
                problems.append(f"outlet '{o.id}' references undeclared room '{o.room}'")
        for a in self.appliances.values():
            if a.room not in self.rooms:
                problems.append(f"appliance '{a.id}' references undeclared room '{a.room}'")
        for obj in self.objects.values():
            if obj.surface not in self.surfaces:
                problems.append(f"object '{obj.id}' references undeclared surface '{obj.surface}'")
            if obj.tag not in FOUR_MS_TAGS:
                problems.append(f"object '{obj.id}' has unknown tag '{obj.tag}'")
        for (outlet, surface), meters in self.reaches.items():
            if outlet not in self.outlets:
                problems.append(f"reach references undeclared outlet '{outlet}'")
            if surface not in self.surfaces:
                problems.append(f"reach references undeclared surface '{surface}'")
            if meters <= 0:
                problems.append(f"reach {outlet}->{surface} must have positive length")
        for a, b in self.adjacency:
            for room in (a, b):
                if room not in self.rooms:
                    problems.append(f"adjacency references undeclared room '{room}'")
        if not self.rooms:
            problems.append("document declares no rooms")
        elif not self.rooms_connected():
            problems.append("room graph is not connected over adjacency")
        return problems


@dataclass(frozen=True)
class SensorSpec:
    gain_options: Tuple[int, ...] = (1, 4, 16)
    upright_required: bool = True
    max_cable_m: float = 3.0
    sampling_rate_hz: float = 7000.0

    def validate(self) -> None:
        if not self.gain_options:
            raise ValueError("gain_options must be non-empty")
        if self.max_cable_m <= 0:
            raise ValueError("max_cable_m must be positive")

    def to_dict(self) -> dict:
        return {
            "gain_options": list(self.gain_options),
            "upright_required": self.upright_required,
            "max_cable_m": self.max_cable_m,
            "sampling_rate_hz": self.sampling_rate_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorSpec":
        spec = cls(
            gain_options=tuple(d.get("gain_options", (1, 4, 16))),
            upright_required=bool(d.get("upright_required", True)),
            max_cable_m=float(d.get("max_cable_m", 3.0)),
            sampling_rate_hz=float(d.get("sampling_rate_hz", 7000.0)),
        )
        spec.validate()
        return spec


def _parse_kv(token: str, key: str) -> Optional[str]:
    prefix = key + "="
    return token[len(prefix):] if token.startswith(prefix) else None


def parse_environment(text: str) -> EnvironmentGraph:
    graph = EnvironmentGraph()
    errors: List[Tuple[int, str]] = []
    decl_lines: Dict[str, int] = {}

    def declare(kind: str, ident: str, line_no: int) -> bool:
        key = f"{kind}:{ident}"
        if ident in graph.rooms or ident in graph.surfaces or ident in graph.outlets \
                or ident in graph.appliances or ident in graph.objects:
            errors.append((line_no, f"duplicate identifier '{ident}'"))
            return False
        decl_lines[key] = line_no
        return True

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "room" and len(tokens) == 2:
                if declare("room", tokens[1], line_no):
                    graph.rooms[tokens[1]] = Room(tokens[1])
            elif kind == "surface" and len(tokens) == 6 and tokens[2] == "in":
                material = _parse_kv(tokens[4], "material")
                visibility = _parse_kv(tokens[5], "visibility")
                if material is None or visibility is None:
                    errors.append((line_no, "surface needs material=<word> visibility=<0..1>"))
                    continue
                if declare("surface", tokens[1], line_no):
                    graph.surfaces[tokens[1]] = Surface(
                        tokens[1], tokens[3], material, float(visibility)
                    )
            elif kind == "outlet" and len(tokens) == 4 and tokens[2] == "in":
                if declare("outlet", tokens[1], line_no):
                    graph.outlets[tokens[1]] = Outlet(tokens[1], tokens[3])
            elif kind == "appliance" and len(tokens) == 4 and tokens[2] == "in":
                if declare("appliance", tokens[1], line_no):
                    graph.appliances[tokens[1]] = Appliance(tokens[1], tokens[3])
            elif kind == "object" and len(tokens) == 5 and tokens[2] == "on":
                tag = _parse_kv(tokens[4], "tag")
                if tag is None:
                    errors.append((line_no, "object needs tag=<4Ms tag>"))
                    continue
                if declare("object", tokens[1], line_no):
                    graph.objects[tokens[1]] = ObjectOfInterest(tokens[1], tokens[3], tag)
            elif kind == "reach" and len(tokens) == 4:
                graph.reaches[(tokens[1], tokens[2])] = float(tokens[3])
                decl_lines[f"reach:{tokens[1]}:{tokens[2]}"] = line_no
            elif kind == "adjacent" and len(tokens) == 3:
                graph.add_adjacent(tokens[1], tokens[2])
                decl_lines[f"adjacent:{min(tokens[1], tokens[2])}:{max(tokens[1], tokens[2])}"] = line_no
            else:
                errors.append((line_no, f"unknown or malformed statement '{line}'"))
        except ValueError:
            errors.append((line_no, f"bad numeric value in '{line}'"))

    for problem in graph.validate():
        # attach the declaring line where we can identify it
        line = 0
        for key, ln in decl_lines.items():
            ident = key.split(":", 1)[1]
            if f"'{ident}'" in problem:
                line = ln
                break
        errors.append((line, problem))

    if errors:
        raise EnvironmentParseError(sorted(errors))
    return graph


def serialize_environment(graph: EnvironmentGraph) -> str:
    lines = []
    for room in sorted(graph.rooms):
        lines.append(f"room {room}")
    for a, b in sorted(graph.adjacency):
        lines.append(f"adjacent {a} {b}")
    for s in sorted(graph.surfaces):
        surf = graph.surfaces[s]
        lines.append(
            f"surface {surf.id} in {surf.room} material={surf.material} "
            f"visibility={surf.visibility:g}"
        )
    for o in sorted(graph.outlets):
        out = graph.outlets[o]
        lines.append(f"outlet {out.id} in {out.room}")
    for a in sorted(graph.appliances):
        app = graph.appliances[a]
        lines.append(f"appliance {app.id} in {app.room}")
    for o in sorted(graph.objects):
        obj = graph.objects[o]
        lines.append(f"object {obj.id} on {obj.surface} tag={obj.tag}")
    for (outlet, surface) in sorted(graph.reaches):
        lines.append(f"reach {outlet} {surface} {graph.reaches[(outlet, surface)]:g}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: EnvironmentGraph) -> dict:
    """JSON-friendly view used by the HTTP API and the UI."""
    return {
        "rooms": sorted(graph.rooms),
        "adjacency": [list(pair) for pair in sorted(graph.adjacency)],
        "surfaces": [
            {
                "id": s.id,
                "room": s.room,
                "material": s.material,
                "visibility": s.visibility,
            }
            for s in (graph.surfaces[k] for k in sorted(graph.surfaces))
        ],
        "outlets": [
            {"id": o.id, "room": o.room}
            for o in (graph.outlets[k] for k in sorted(graph.outlets))
        ],
        "appliances": [
            {"id": a.id, "room": a.room}
            for a in (graph.appliances[k] for k in sorted(graph.appliances))
        ],
        "objects": [
            {"id": ob.id, "surface": ob.surface, "tag": ob.tag}
            for ob in (graph.objects[k] for k in sorted(graph.objects))
        ],
        "reaches": [
            {"outlet": k[0], "surface": k[1], "meters": v}
            for k, v in sorted(graph.reaches.items())
        ],
    }
