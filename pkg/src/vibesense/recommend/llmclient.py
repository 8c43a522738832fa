"""HTTP chat-completion client and the constrained output grammar.

The engine treats the model as an untrusted structured-output source: its
reply must match one of two line forms,

    ASK <field>: <question text>
    RECOMMEND <surface> <outlet> <gain> perf=<x> ux=<y>

anything else raises LLMError and the engine falls back to the rule-based
expert. The endpoint and model name come from ``VIBESENSE_LLM_ENDPOINT``
and ``VIBESENSE_LLM_MODEL``; with no endpoint configured there is no
client and the fallback expert runs unconditionally.
"""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources
from typing import List, Mapping, Optional, Union

ENDPOINT_ENV = "VIBESENSE_LLM_ENDPOINT"
MODEL_ENV = "VIBESENSE_LLM_MODEL"


class LLMError(RuntimeError):
    pass


@dataclass(frozen=True)
class AskAction:
    field: str
    question: str


@dataclass(frozen=True)
class RecommendItem:
    surface: str
    outlet: str
    gain: int
    perf: float
    ux: float


@dataclass(frozen=True)
class RecommendAction:
    items: List[RecommendItem]


_ASK_RE = re.compile(r"^ASK\s+(\w+)\s*:\s*(.+)$")
_RECOMMEND_RE = re.compile(
    r"^RECOMMEND\s+(\S+)\s+(\S+)\s+(-?\d+)\s+perf=([0-9.eE+-]+)\s+ux=([0-9.eE+-]+)\s*$"
)


def parse_agent_output(text: str) -> Union[AskAction, RecommendAction]:
    """Parse model output against the constrained grammar."""
    ask: Optional[AskAction] = None
    items: List[RecommendItem] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        m = _RECOMMEND_RE.match(line)
        if m:
            try:
                items.append(
                    RecommendItem(
                        m.group(1), m.group(2), int(m.group(3)),
                        float(m.group(4)), float(m.group(5)),
                    )
                )
            except ValueError as err:
                raise LLMError(f"bad RECOMMEND numbers in {line!r}: {err}") from err
            continue
        m = _ASK_RE.match(line)
        if m and ask is None:
            ask = AskAction(m.group(1), m.group(2).strip())
    if items:
        return RecommendAction(items)
    if ask is not None:
        return ask
    raise LLMError(f"output matched neither ASK nor RECOMMEND: {text[:200]!r}")


class LLMClient:
    def __init__(self, endpoint: str, model: str = "expert", timeout_s: float = 10.0):
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, system: str, messages: List[dict]) -> str:
        body = json.dumps(
            {"model": self.model, "system": system, "messages": messages}
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, ValueError, OSError) as err:
            raise LLMError(f"completion request failed: {err}") from err
        text = payload.get("text")
        if not isinstance(text, str):
            raise LLMError("completion response missing 'text' field")
        return text

    @classmethod
    def from_env(cls, environ: Mapping[str, str]) -> Optional["LLMClient"]:
        endpoint = environ.get(ENDPOINT_ENV)
        if not endpoint:
            return None
        return cls(endpoint, environ.get(MODEL_ENV, "expert"))


def render_prompt(
    schema: str,
    sensor: dict,
    preferences: dict,
    missing: List[str],
    mode: str,
) -> str:
    """Fill the shipped chain-of-thought template with the session context."""
    template = (
        resources.files("vibesense.recommend")
        .joinpath("prompts/expert_system.txt")
        .read_text(encoding="utf-8")
    )
    return template.format(
        mode=mode,
        schema=schema.strip(),
        sensor=json.dumps(sensor, sort_keys=True),
        preferences=json.dumps(preferences, sort_keys=True),
        missing=", ".join(missing) if missing else "(none)",
    )
