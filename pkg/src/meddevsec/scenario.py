"""Attack scenario drafting for false data injection against inference.

Given a hazard, an unsafe control action, an attack-surface entry point, and
an ML attack pattern, this module builds a structured prompt for a text
completion gateway, parses the reply into an ordered step sequence, and
degrades to a deterministic template rendering whenever the gateway
misbehaves.  Generation never raises on gateway trouble; the returned
scenario records its provenance, the raw gateway text, and one warning per
failed attempt so the degradation is visible to the analyst.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Mapping, Protocol, Sequence

from .errors import GatewayError, MedDevSecError, ParseError, ValidationError
from .inventory import (
    AttackClass,
    MLAttackPattern,
    attack_pattern_from_dict,
    attack_pattern_to_dict,
)
from .model import (
    Hazard,
    UnsafeControlAction,
    hazard_from_dict,
    hazard_to_dict,
    uca_from_dict,
    uca_to_dict,
)
from .textmatch import any_term_in_text, normalize_term, term_in_text
from .vulnintel import VulnerabilityRecord, record_from_dict, record_to_dict

PROMPT_TEMPLATE_FILE = "prompt_scenario_v1.txt"
PROMPT_TEMPLATE_VERSION = "v1"
CUE_TABLE_FILE = "scenario_cues.json"
GATEWAY_TOKEN_ENV = "MEDDEVSEC_GATEWAY_TOKEN"


class StepCategory(str, Enum):
    """Fixed kill-chain step categories, in order."""

    Reconnaissance = "Reconnaissance"
    Exploitation = "Exploitation"
    NetworkInfiltration = "NetworkInfiltration"
    DataInterception = "DataInterception"
    DataTampering = "DataTampering"
    MLModelAttack = "MLModelAttack"
    ControllerManipulation = "ControllerManipulation"
    OutputManipulation = "OutputManipulation"
    PatientImpact = "PatientImpact"


CATEGORY_ORDER: tuple[StepCategory, ...] = tuple(StepCategory)
_CATEGORY_INDEX = {category: i for i, category in enumerate(CATEGORY_ORDER)}

MANDATORY_CATEGORIES = frozenset(
    {
        StepCategory.Exploitation,
        StepCategory.DataTampering,
        StepCategory.MLModelAttack,
        StepCategory.PatientImpact,
    }
)

# Human-readable step names used when a parsed step has no title of its own
# and for the deterministic fallback templates.
CATEGORY_DISPLAY: dict[StepCategory, str] = {
    StepCategory.Reconnaissance: "Reconnaissance",
    StepCategory.Exploitation: "Exploitation",
    StepCategory.NetworkInfiltration: "Network infiltration",
    StepCategory.DataInterception: "Data interception",
    StepCategory.DataTampering: "Data tampering",
    StepCategory.MLModelAttack: "ML model attack",
    StepCategory.ControllerManipulation: "ML controller manipulation",
    StepCategory.OutputManipulation: "Output device manipulation",
    StepCategory.PatientImpact: "Patient impact",
}


class Provenance(str, Enum):
    Gateway = "Gateway"
    Fallback = "Fallback"


class Disposition(str, Enum):
    """Analyst triage state for a drafted scenario."""

    Open = "Open"
    Mitigated = "Mitigated"
    Rejected = "Rejected"


class ScenarioParseError(ParseError):
    """Gateway reply could not be read as a valid scenario.

    ``diagnostics`` lists every offending line or sequence violation so a
    caller can log exactly why the reply was rejected.
    """

    def __init__(self, diagnostics: Sequence[str]) -> None:
        self.diagnostics = tuple(diagnostics)
        super().__init__(
            "reply is not a valid attack scenario: " + "; ".join(self.diagnostics)
        )


@dataclass(frozen=True)
class AttackStep:
    category: StepCategory
    name: str
    description: str

    def __post_init__(self) -> None:
        if not isinstance(self.category, StepCategory):
            object.__setattr__(self, "category", StepCategory(self.category))
        if not self.name.strip():
            raise ValidationError("attack step: name must be nonempty")
        if not self.description.strip():
            raise ValidationError(f"attack step {self.name!r}: description must be nonempty")


def _technology_intersects(technology: str, record: VulnerabilityRecord) -> bool:
    # Intersection under the package-wide token-boundary rule, in either
    # direction: a versioned keyword like "android 13" intersects the
    # affected term "android" even though the strings differ.
    return any(
        term_in_text(term, technology) or term_in_text(technology, term)
        for term in record.affected_terms
    )


@dataclass(frozen=True)
class ScenarioRequest:
    """Everything the generator needs about one candidate attack.

    ``data_flow`` is the ordered component-id path that inference input
    travels, from the first sensor to the patient; ``target_component`` must
    sit on it.  ``target_technology`` is a keyword from the targeted
    component's profile and must intersect the vulnerability's affected
    terms after normalization.
    """

    system_description: str
    data_flow: tuple[str, ...]
    ml_attack: MLAttackPattern
    target_component: str
    target_technology: str
    vulnerability: VulnerabilityRecord
    hazard: Hazard
    uca: UnsafeControlAction

    def __post_init__(self) -> None:
        object.__setattr__(self, "system_description", self.system_description.strip())
        object.__setattr__(self, "data_flow", tuple(self.data_flow))
        object.__setattr__(
            self, "target_technology", normalize_term(self.target_technology)
        )
        if not self.system_description:
            raise ValidationError("scenario request: system description must be nonempty")
        if len(self.data_flow) < 2:
            raise ValidationError("scenario request: data flow needs at least two components")
        if self.target_component not in self.data_flow:
            raise ValidationError(
                f"scenario request: target component {self.target_component!r}"
                " does not appear in the data flow"
            )
        if not self.target_technology:
            raise ValidationError("scenario request: target technology must be nonempty")
        if not _technology_intersects(self.target_technology, self.vulnerability):
            raise ValidationError(
                f"scenario request: technology {self.target_technology!r} does not"
                f" intersect the affected terms of {self.vulnerability.id}"
            )


def _step_sequence_problems(steps: Sequence[AttackStep]) -> list[str]:
    """Invariant check shared by the parser and the scenario constructor."""
    problems: list[str] = []
    if not steps:
        problems.append("scenario has no steps")
        return problems
    if steps[0].category is not StepCategory.Reconnaissance:
        problems.append(
            f"first step must be Reconnaissance, got {steps[0].category.value}"
        )
    previous = -1
    for position, step in enumerate(steps, start=1):
        index = _CATEGORY_INDEX[step.category]
        if index < previous:
            problems.append(
                f"step {position} ({step.category.value}) is out of category order"
            )
        previous = max(previous, index)
    present = {step.category for step in steps}
    missing = [c.value for c in CATEGORY_ORDER if c in MANDATORY_CATEGORIES - present]
    if missing:
        problems.append("missing required categories: " + ", ".join(missing))
    return problems


@dataclass(frozen=True)
class AttackScenario:
    request: ScenarioRequest
    steps: tuple[AttackStep, ...]
    provenance: Provenance
    raw_gateway_output: str | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if not isinstance(self.provenance, Provenance):
            object.__setattr__(self, "provenance", Provenance(self.provenance))
        problems = _step_sequence_problems(self.steps)
        if problems:
            raise ValidationError("attack scenario: " + "; ".join(problems))


# --- prompt construction ---------------------------------------------------


@lru_cache(maxsize=1)
def _prompt_template() -> Template:
    text = (
        resources.files("meddevsec") / "data" / PROMPT_TEMPLATE_FILE
    ).read_text(encoding="utf-8")
    return Template(text)


def build_prompt(request: ScenarioRequest) -> str:
    """Render the gateway prompt; byte-deterministic for equal requests."""
    vulnerability = f"{request.vulnerability.id}: {request.vulnerability.summary}"
    mapping = {
        "system_description": request.system_description,
        "data_flow": " -> ".join(request.data_flow),
        "ml_attack": request.ml_attack.name,
        "target_component": request.target_component,
        "target_technology": request.target_technology,
        "vulnerability": vulnerability,
    }
    try:
        return _prompt_template().substitute(mapping)
    except (KeyError, ValueError) as exc:
        # A placeholder the code does not know about is a packaging defect,
        # not a caller mistake; refuse to emit a partial prompt.
        raise MedDevSecError(
            f"prompt template {PROMPT_TEMPLATE_FILE} has an unresolvable placeholder: {exc}"
        ) from exc


# --- deterministic fallback ------------------------------------------------


def generate_fallback(request: ScenarioRequest) -> AttackScenario:
    """Render all nine step categories from fixed templates.

    Deterministic: equal requests produce identical scenarios.
    """
    flow = request.data_flow
    target = request.target_component
    index = flow.index(target)
    next_hop = flow[index + 1] if index + 1 < len(flow) else flow[-1]
    source = flow[0]
    flow_text = " -> ".join(flow)
    attack = request.ml_attack
    vuln_id = request.vulnerability.id

    ml_description = (
        f"Apply {attack.name} ({attack.attack_class.value}, {attack.phase.value})"
        " to choose injected values that drive the model's output toward the"
        " attacker's goal."
    )
    if attack.attack_class is AttackClass.ModelEvasion:
        ml_description += (
            " This is an evasion attack: the tampered inputs are crafted so the"
            " live model misreads them at inference time."
        )

    def step(category: StepCategory, description: str, name: str | None = None) -> AttackStep:
        return AttackStep(
            category=category,
            name=name if name is not None else CATEGORY_DISPLAY[category],
            description=description,
        )

    steps = (
        step(
            StepCategory.Reconnaissance,
            f"Survey the target deployment to locate the {target} component,"
            f" fingerprint the {request.target_technology} technology it uses, and"
            f" match that technology against public advisories, which turns up"
            f" {vuln_id}.",
        ),
        step(
            StepCategory.Exploitation,
            f"Exploit {vuln_id} to take control of {target} and gain a position on"
            " the path that carries inference inputs.",
        ),
        step(
            StepCategory.NetworkInfiltration,
            f"From {target}, infiltrate the modeled data path {flow_text} and"
            f" obtain the ability to observe and relay traffic on the segment"
            f" toward {next_hop}.",
        ),
        step(
            StepCategory.DataInterception,
            f"Capture the readings sent from {source} toward {next_hop} and learn"
            " their format, range, and timing.",
        ),
        step(
            StepCategory.DataTampering,
            "Replace the captured readings with crafted false values before they"
            " are delivered, so the model receives attacker-chosen inputs during"
            " inference.",
        ),
        step(StepCategory.MLModelAttack, ml_description, name=attack.name),
        step(
            StepCategory.ControllerManipulation,
            "The model consumes the injected values and its prediction is wrong,"
            f" which enables the unsafe control action: {request.uca.description}",
        ),
        step(
            StepCategory.OutputManipulation,
            "Acting on the wrong prediction, the output stage carries out the"
            f" {request.uca.control_action} action with the attacker-chosen"
            " magnitude.",
        ),
        step(
            StepCategory.PatientImpact,
            f"The patient is exposed to the hazard: {request.hazard.description}",
        ),
    )
    return AttackScenario(request=request, steps=steps, provenance=Provenance.Fallback)


# --- gateways ---------------------------------------------------------------


class Gateway(Protocol):
    """Text completion transport; raise GatewayError on transport trouble."""

    def complete(self, prompt: str) -> str:  # pragma: no cover - protocol
        ...


@dataclass
class StubGateway:
    """Scripted gateway for tests and offline runs.

    Each call consumes the next script entry; a string is returned, an
    exception instance is raised.  The last entry repeats once the script is
    exhausted.  Deterministic given the script; prompts received are recorded
    on ``calls``.
    """

    script: Sequence[str | Exception]
    calls: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.script = tuple(self.script)
        if not self.script:
            raise ValidationError("stub gateway: script must have at least one entry")

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        entry = self.script[min(len(self.calls), len(self.script)) - 1]
        if isinstance(entry, Exception):
            raise entry
        return entry


@dataclass
class HttpGateway:
    """Single request/response completion over HTTP.

    POSTs ``{"prompt": ...}`` to ``url`` and expects a JSON object with a
    string field ``response``.  A bearer token is read from the environment
    variable named by ``token_env`` when present.  Nondeterministic: the
    remote model decides the reply.
    """

    url: str
    timeout: float = 30.0
    token_env: str = GATEWAY_TOKEN_ENV

    def complete(self, prompt: str) -> str:
        import httpx  # deferred so offline workflows never need it

        headers = {}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = httpx.post(
                self.url, json={"prompt": prompt}, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            payload = response.json()
        except httpx.HTTPError as exc:
            raise GatewayError(f"gateway request failed: {exc}") from exc
        except ValueError as exc:
            raise GatewayError("gateway returned a non-JSON body") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("response"), str):
            raise GatewayError("gateway reply is missing the string field 'response'")
        return payload["response"]


# --- reply parsing -----------------------------------------------------------


@lru_cache(maxsize=1)
def _cue_table() -> tuple[tuple[StepCategory, tuple[str, ...]], ...]:
    import json

    raw = json.loads(
        (resources.files("meddevsec") / "data" / CUE_TABLE_FILE).read_text(
            encoding="utf-8"
        )
    )
    table = []
    for entry in raw["categories"]:
        table.append((StepCategory(entry["category"]), tuple(entry["cues"])))
    if [c for c, _ in table] != list(CATEGORY_ORDER):
        raise MedDevSecError(f"{CUE_TABLE_FILE} must list every category once, in order")
    return tuple(table)


_MARKER_RE = re.compile(
    r"^\s*(?:step\s+\d+\s*[-:.)]\s*|\(\d+\)\s*|\d+\s*[.)]\s*|[-*•]\s+)",
    re.IGNORECASE,
)


def _split_title(rest: str) -> tuple[str | None, str]:
    """Split a step line into (title, description); title may be absent."""
    for separator in (":", " - "):
        head, found, tail = rest.partition(separator)
        if found and head.strip() and tail.strip():
            return head.strip(), tail.strip()
    return None, rest.strip()


def _classify(title: str | None, whole_line: str) -> StepCategory | None:
    """First category, in kill-chain order, with a cue in the title, then
    the whole line if no title cue matched."""
    candidates = [title] if title else []
    candidates.append(whole_line)
    for text in candidates:
        for category, cues in _cue_table():
            if any_term_in_text(cues, text):
                return category
    return None


def parse_scenario(response: str, request: ScenarioRequest) -> AttackScenario:
    """Read a gateway reply into a validated scenario.

    Accepts numbered ("1.", "2)", "(3)", "Step 4:") and bulleted ("-", "*")
    step lines; other lines are treated as prose and skipped.  Raises
    :class:`ScenarioParseError` carrying one diagnostic per unmappable line
    or violated sequence invariant.
    """
    diagnostics: list[str] = []
    steps: list[AttackStep] = []
    marker_lines = 0
    for lineno, line in enumerate(response.splitlines(), start=1):
        marker = _MARKER_RE.match(line)
        if marker is None:
            continue
        marker_lines += 1
        rest = line[marker.end() :].strip()
        if not rest:
            diagnostics.append(f"line {lineno}: step marker with no text")
            continue
        title, description = _split_title(rest)
        category = _classify(title, rest)
        if category is None:
            diagnostics.append(f"line {lineno}: no step category cue in {rest!r}")
            continue
        steps.append(
            AttackStep(
                category=category,
                name=title if title is not None else CATEGORY_DISPLAY[category],
                description=description,
            )
        )
    if marker_lines == 0:
        diagnostics.append("no numbered or bulleted step lines found")
    diagnostics.extend(_step_sequence_problems(steps))
    if diagnostics:
        raise ScenarioParseError(diagnostics)
    return AttackScenario(
        request=request,
        steps=tuple(steps),
        provenance=Provenance.Gateway,
        raw_gateway_output=response,
    )


# --- generation --------------------------------------------------------------


def generate(
    request: ScenarioRequest, gateway: Gateway, *, max_retries: int = 2
) -> AttackScenario:
    """Draft a scenario via the gateway, degrading to the fallback.

    ``max_retries`` is the total number of gateway attempts.  Transport
    failures and unparseable replies each add one warning; after the last
    attempt the deterministic fallback is returned with those warnings and
    the last raw reply attached.  Never raises on gateway misbehavior.
    """
    if max_retries < 1:
        raise ValidationError("max_retries must be at least 1")
    prompt = build_prompt(request)
    warnings: list[str] = []
    raw_output: str | None = None
    for attempt in range(1, max_retries + 1):
        try:
            raw_output = gateway.complete(prompt)
        except GatewayError as exc:
            warnings.append(f"attempt {attempt}: gateway transport failure: {exc}")
            continue
        except Exception as exc:  # a misbehaving gateway must not leak through
            warnings.append(
                f"attempt {attempt}: gateway raised {type(exc).__name__}: {exc}"
            )
            continue
        try:
            scenario = parse_scenario(raw_output, request)
        except ScenarioParseError as exc:
            shown = "; ".join(exc.diagnostics[:3])
            warnings.append(f"attempt {attempt}: reply rejected: {shown}")
            continue
        return replace(scenario, warnings=tuple(warnings))
    warnings.append(
        f"gateway output unusable after {max_retries} attempt(s);"
        " using the deterministic fallback"
    )
    fallback = generate_fallback(request)
    return replace(fallback, warnings=tuple(warnings), raw_gateway_output=raw_output)


# --- rendering and persistence ----------------------------------------------


def format_scenario_text(scenario: AttackScenario) -> str:
    """Fixed-layout text rendering; byte-deterministic."""
    request = scenario.request
    lines = [
        f"Attack scenario [{scenario.provenance.value}]",
        f"Target: {request.target_component} ({request.target_technology}),"
        f" vulnerability {request.vulnerability.id}",
        "Steps:",
    ]
    for number, step in enumerate(scenario.steps, start=1):
        lines.append(
            f"{number:>2}. [{step.category.value}] {step.name}: {step.description}"
        )
    if scenario.warnings:
        lines.append("Warnings:")
        for warning in scenario.warnings:
            lines.append(f"  - {warning}")
    return "\n".join(lines) + "\n"


def scenario_request_to_dict(request: ScenarioRequest) -> dict[str, object]:
    return {
        "system_description": request.system_description,
        "data_flow": list(request.data_flow),
        "ml_attack": attack_pattern_to_dict(request.ml_attack),
        "target_component": request.target_component,
        "target_technology": request.target_technology,
        "vulnerability": record_to_dict(request.vulnerability),
        "hazard": hazard_to_dict(request.hazard),
        "uca": uca_to_dict(request.uca),
    }


def _require(raw: Mapping[str, object], field_name: str, where: str) -> object:
    if field_name not in raw:
        raise ParseError(f"missing field {field_name!r}", context=where)
    return raw[field_name]


def scenario_request_from_dict(raw: Mapping[str, object]) -> ScenarioRequest:
    where = "scenario request"
    flow = _require(raw, "data_flow", where)
    if not isinstance(flow, list):
        raise ParseError("data_flow must be an array", context=where)
    try:
        return ScenarioRequest(
            system_description=str(_require(raw, "system_description", where)),
            data_flow=tuple(str(c) for c in flow),
            ml_attack=attack_pattern_from_dict(dict(_require(raw, "ml_attack", where))),
            target_component=str(_require(raw, "target_component", where)),
            target_technology=str(_require(raw, "target_technology", where)),
            vulnerability=record_from_dict(dict(_require(raw, "vulnerability", where))),
            hazard=hazard_from_dict(dict(_require(raw, "hazard", where))),
            uca=uca_from_dict(dict(_require(raw, "uca", where))),
        )
    except (TypeError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def scenario_to_dict(scenario: AttackScenario) -> dict[str, object]:
    return {
        "request": scenario_request_to_dict(scenario.request),
        "steps": [
            {
                "category": step.category.value,
                "name": step.name,
                "description": step.description,
            }
            for step in scenario.steps
        ],
        "provenance": scenario.provenance.value,
        "raw_gateway_output": scenario.raw_gateway_output,
        "warnings": list(scenario.warnings),
    }


def scenario_from_dict(raw: Mapping[str, object]) -> AttackScenario:
    where = "attack scenario"
    steps_raw = _require(raw, "steps", where)
    if not isinstance(steps_raw, list):
        raise ParseError("steps must be an array", context=where)
    raw_output = raw.get("raw_gateway_output")
    warnings_raw = raw.get("warnings", [])
    if not isinstance(warnings_raw, list):
        raise ParseError("warnings must be an array", context=where)
    try:
        steps = tuple(
            AttackStep(
                category=StepCategory(str(_require(s, "category", "step"))),
                name=str(_require(s, "name", "step")),
                description=str(_require(s, "description", "step")),
            )
            for s in steps_raw
        )
        return AttackScenario(
            request=scenario_request_from_dict(dict(_require(raw, "request", where))),
            steps=steps,
            provenance=Provenance(str(_require(raw, "provenance", where))),
            raw_gateway_output=None if raw_output is None else str(raw_output),
            warnings=tuple(str(w) for w in warnings_raw),
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc
