"""Causal analysis of incident narratives against a control structure.

The pipeline has three deterministic stages: split a free-text narrative
into sentence segments, map each segment onto one control loop of the
structure through a device-term lexicon, and run rule patterns over the
assigned segments to extract causal factors.  Aggregation reduces the
factors to per-class and per-loop tallies with half-up percentages.  An
optional gateway pass can replace the rule extraction; its replies face
the same structural validation and the rules remain the degradation path.

This is desk-scale text handling: literal term matching with token
boundaries, an abbreviation list for the segmenter, no statistical NLP.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template
from typing import Mapping, Sequence

from .errors import GatewayError, ParseError, ValidationError
from .model import ControlStructure, enumerate_control_loops
from .regulatory import round_percent
from .scenario import Gateway, Provenance
from .textmatch import term_in_text

LEXICON_FILE = "cast_lexicon_v1.json"
RULES_FILE = "cast_rules_v1.json"
ABBREVIATIONS_FILE = "cast_abbreviations_v1.txt"
PROMPT_TEMPLATE_FILE = "prompt_cast_v1.txt"

UNASSIGNED = "Unassigned"


class FactorClass(str, Enum):
    """Fixed causal factor taxonomy."""

    InadequateControlAlgorithm = "InadequateControlAlgorithm"
    InadequateFeedback = "InadequateFeedback"
    ComponentFailure = "ComponentFailure"
    CommunicationFlaw = "CommunicationFlaw"
    HumanActionGap = "HumanActionGap"
    SecurityVulnerability = "SecurityVulnerability"


# Constraint wording for gateway-extracted factors, which carry no rule of
# their own.  Rule-based factors take the constraint from the rules file.
_CLASS_CONSTRAINTS: dict[FactorClass, str] = {
    FactorClass.InadequateControlAlgorithm: (
        "{controller} must compute control actions for {controlled} that are"
        " safe for the observed process state."
    ),
    FactorClass.InadequateFeedback: (
        "{controller} must surface state changes of {controlled} to the"
        " operator quickly enough to act on."
    ),
    FactorClass.ComponentFailure: (
        "Hardware in the {controller} to {controlled} loop must keep"
        " operating or fail in a detectable way."
    ),
    FactorClass.CommunicationFlaw: (
        "The channel between {controller} and {controlled} must deliver data"
        " completely, in order, and on time."
    ),
    FactorClass.HumanActionGap: (
        "Operator procedures around the {controller} to {controlled} loop"
        " must prevent and catch erroneous entries."
    ),
    FactorClass.SecurityVulnerability: (
        "Only authenticated, authorized parties may influence the"
        " {controller} to {controlled} loop."
    ),
}


@dataclass(frozen=True)
class NarrativeSegment:
    """One sentence of the narrative with its position in the source text."""

    index: int
    text: str
    char_range: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "char_range", tuple(self.char_range))
        if self.index < 0:
            raise ValidationError("segment index must be nonnegative")
        if not self.text.strip():
            raise ValidationError(f"segment {self.index}: text must be nonempty")
        start, end = self.char_range
        if start < 0 or end <= start:
            raise ValidationError(f"segment {self.index}: invalid char range")
        if end - start != len(self.text):
            raise ValidationError(
                f"segment {self.index}: char range does not match text length"
            )


@dataclass(frozen=True)
class LoopAssignment:
    """A segment mapped to one control loop, or left unassigned.

    ``loop`` is ``"controller->controlled"`` or :data:`UNASSIGNED`.  An
    assigned segment always carries at least one evidence entry: the
    matched lexicon terms, any matched link channel as ``channel:<name>``,
    and a note when a score tie was broken by component id order.
    """

    segment: NarrativeSegment
    loop: str
    evidence: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if self.loop == UNASSIGNED:
            if self.evidence:
                raise ValidationError(
                    f"segment {self.segment.index}: unassigned segments carry no evidence"
                )
        else:
            if "->" not in self.loop:
                raise ValidationError(
                    f"segment {self.segment.index}: malformed loop key {self.loop!r}"
                )
            if not self.evidence:
                raise ValidationError(
                    f"segment {self.segment.index}: assignment to {self.loop} needs evidence"
                )

    @property
    def assigned(self) -> bool:
        return self.loop != UNASSIGNED


@dataclass(frozen=True)
class CausalFactor:
    """One violated-constraint finding, tied to its segment and rule."""

    id: str
    loop: str
    factor_class: FactorClass
    description: str
    violated_constraint: str
    segment_index: int
    rule_id: str
    matched_terms: tuple[str, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.factor_class, FactorClass):
            object.__setattr__(self, "factor_class", FactorClass(self.factor_class))
        object.__setattr__(self, "matched_terms", tuple(self.matched_terms))
        if not self.id.strip():
            raise ValidationError("causal factor: id must be nonempty")
        if "->" not in self.loop:
            raise ValidationError(f"causal factor {self.id}: malformed loop key")
        if not self.description.strip():
            raise ValidationError(f"causal factor {self.id}: description must be nonempty")
        if not self.violated_constraint.strip():
            raise ValidationError(f"causal factor {self.id}: constraint must be nonempty")
        if self.segment_index < 0:
            raise ValidationError(f"causal factor {self.id}: segment index must be nonnegative")
        if not self.rule_id.strip():
            raise ValidationError(f"causal factor {self.id}: rule id must be nonempty")


@dataclass(frozen=True)
class CountStat:
    label: str
    count: int
    percent: float

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValidationError("count stat: label must be nonempty")
        if self.count < 0:
            raise ValidationError(f"count stat {self.label}: count must be nonnegative")


@dataclass(frozen=True)
class AggregateCausalStats:
    """Factor tallies; counts on each axis sum to the factor total."""

    total: int
    by_class: tuple[CountStat, ...]
    by_loop: tuple[CountStat, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_class", tuple(self.by_class))
        object.__setattr__(self, "by_loop", tuple(self.by_loop))
        for axis_name, axis in (("class", self.by_class), ("loop", self.by_loop)):
            tally = sum(stat.count for stat in axis)
            if tally != self.total:
                raise ValidationError(
                    f"aggregate stats: {axis_name} counts sum to {tally}, expected {self.total}"
                )


@dataclass(frozen=True)
class CausalRule:
    """One pattern from the rules file."""

    id: str
    factor_class: FactorClass
    terms: tuple[str, ...]
    constraint: str


@dataclass(frozen=True)
class CastAnalysis:
    """The full result of analyzing one narrative."""

    narrative: str
    segments: tuple[NarrativeSegment, ...]
    assignments: tuple[LoopAssignment, ...]
    factors: tuple[CausalFactor, ...]
    stats: AggregateCausalStats
    provenance: Provenance
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "assignments", tuple(self.assignments))
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if not isinstance(self.provenance, Provenance):
            object.__setattr__(self, "provenance", Provenance(self.provenance))
        if len(self.assignments) != len(self.segments):
            raise ValidationError("causal analysis: one assignment per segment required")
        assigned = {a.segment.index: a for a in self.assignments if a.assigned}
        for factor in self.factors:
            if factor.segment_index not in assigned:
                raise ValidationError(
                    f"causal analysis: factor {factor.id} cites unassigned segment"
                )


# --- data files -----------------------------------------------------------


def _read_data(name: str) -> str:
    return (resources.files("meddevsec") / "data" / name).read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _abbreviations() -> frozenset[str]:
    entries = set()
    for line in _read_data(ABBREVIATIONS_FILE).splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.lower())
    return frozenset(entries)


def load_lexicon(path: str | Path | None = None) -> dict[str, str]:
    """Device-term lexicon mapping surface terms to component ids."""

    where = LEXICON_FILE if path is None else str(path)
    text = _read_data(LEXICON_FILE) if path is None else Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise ParseError(f"not valid JSON: {exc}", context=where) from exc
    terms = raw.get("terms") if isinstance(raw, Mapping) else None
    if not isinstance(terms, Mapping) or not terms:
        raise ParseError("lexicon needs a nonempty 'terms' object", context=where)
    table: dict[str, str] = {}
    for term, component in terms.items():
        if not isinstance(term, str) or not term.strip():
            raise ParseError("lexicon terms must be nonempty strings", context=where)
        if not isinstance(component, str) or not component.strip():
            raise ParseError(f"term {term!r} needs a component id", context=where)
        table[term] = component
    return table


def load_rules(path: str | Path | None = None) -> tuple[CausalRule, ...]:
    """Causal factor rules; malformed files raise :class:`ParseError`."""

    where = RULES_FILE if path is None else str(path)
    text = _read_data(RULES_FILE) if path is None else Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise ParseError(f"not valid JSON: {exc}", context=where) from exc
    entries = raw.get("rules") if isinstance(raw, Mapping) else None
    if not isinstance(entries, list) or not entries:
        raise ParseError("rules file needs a nonempty 'rules' array", context=where)
    rules: list[CausalRule] = []
    seen: set[str] = set()
    for pos, entry in enumerate(entries):
        if not isinstance(entry, Mapping):
            raise ParseError(f"rule {pos} must be an object", context=where)
        rule_id = entry.get("id")
        if not isinstance(rule_id, str) or not rule_id.strip():
            raise ParseError(f"rule {pos} needs a nonempty id", context=where)
        if rule_id in seen:
            raise ParseError(f"duplicate rule id {rule_id!r}", context=where)
        seen.add(rule_id)
        try:
            factor_class = FactorClass(str(entry.get("factor_class")))
        except ValueError as exc:
            raise ParseError(
                f"rule {rule_id}: unknown factor class {entry.get('factor_class')!r}",
                context=where,
            ) from exc
        terms = entry.get("terms")
        if (
            not isinstance(terms, list)
            or not terms
            or not all(isinstance(t, str) and t.strip() for t in terms)
        ):
            raise ParseError(f"rule {rule_id}: terms must be nonempty strings", context=where)
        constraint = entry.get("constraint")
        if not isinstance(constraint, str) or not constraint.strip():
            raise ParseError(f"rule {rule_id}: constraint must be nonempty", context=where)
        try:
            constraint.format(controller="c", controlled="p")
        except (KeyError, IndexError, ValueError) as exc:
            raise ParseError(
                f"rule {rule_id}: constraint has an unresolvable placeholder: {exc}",
                context=where,
            ) from exc
        rules.append(
            CausalRule(
                id=rule_id,
                factor_class=factor_class,
                terms=tuple(terms),
                constraint=constraint,
            )
        )
    return tuple(rules)


# --- segmentation ---------------------------------------------------------

_PUNCT_RUN_RE = re.compile(r"[.?!]+")
_SENTENCE_START_RE = re.compile(r"\s+[\"'(\[]?[A-Z]")


def _token_before(text: str, pos: int) -> str:
    """The word immediately before ``pos``, keeping interior periods."""

    i = pos
    while i > 0 and (text[i - 1].isalnum() or text[i - 1] in ".&-"):
        i -= 1
    return text[i:pos].strip(".").lower()


def segment_narrative(narrative: str) -> tuple[NarrativeSegment, ...]:
    """Split a narrative into ordered, non-overlapping sentence segments.

    A boundary is a terminal punctuation run followed by whitespace and a
    capital letter, unless the word before a period run is a known
    abbreviation or a single-letter initial.  Decimal numbers never split
    because no whitespace follows the period.  Segments are trimmed, so
    concatenating them with the original whitespace between spans
    reconstructs the narrative, and every non-whitespace character falls
    inside exactly one span.
    """

    if not narrative or not narrative.strip():
        raise ValidationError("narrative must be nonempty")
    abbrevs = _abbreviations()
    boundaries: list[int] = []
    for match in _PUNCT_RUN_RE.finditer(narrative):
        if not _SENTENCE_START_RE.match(narrative, match.end()):
            continue
        run = match.group()
        if set(run) == {"."}:
            token = _token_before(narrative, match.start())
            if token in abbrevs or (len(token) == 1 and token.isalpha()):
                continue
        boundaries.append(match.end())

    segments: list[NarrativeSegment] = []
    prev = 0
    for cut in [*boundaries, len(narrative)]:
        chunk = narrative[prev:cut]
        stripped = chunk.strip()
        if stripped:
            start = prev + (len(chunk) - len(chunk.lstrip()))
            end = prev + len(chunk.rstrip())
            segments.append(
                NarrativeSegment(
                    index=len(segments),
                    text=narrative[start:end],
                    char_range=(start, end),
                )
            )
        prev = cut
    return tuple(segments)


# --- loop mapping ---------------------------------------------------------


def loop_key(controller: str, controlled: str) -> str:
    return f"{controller}->{controlled}"


def map_segments(
    segments: Sequence[NarrativeSegment],
    structure: ControlStructure,
    lexicon: Mapping[str, str] | None = None,
) -> tuple[LoopAssignment, ...]:
    """Assign each segment to the control loop with the most lexicon hits.

    A loop scores one point per matched lexicon term naming its controller
    or controlled component, plus one per link channel on its paths that
    appears in the segment.  Zero points everywhere leaves the segment
    unassigned.  Ties go to the smallest controller id, then the smallest
    controlled id, and the tie is recorded in the evidence.  Lexicon
    entries for components absent from the structure are ignored, so one
    packaged lexicon can serve several structure variants.
    """

    table = load_lexicon() if lexicon is None else dict(lexicon)
    active = {
        term: component
        for term, component in table.items()
        if structure.has_component(component)
    }
    loops = enumerate_control_loops(structure)
    loop_channels: list[frozenset[str]] = []
    for loop in loops:
        channels = {
            channel
            for link_id in loop.action_path + loop.feedback_path
            if (channel := structure.link(link_id).channel)
        }
        loop_channels.append(frozenset(channels))

    assignments: list[LoopAssignment] = []
    for segment in segments:
        hits = {
            term: component
            for term, component in active.items()
            if term_in_text(term, segment.text)
        }
        scored: list[tuple[int, int]] = []
        best = 0
        for pos, loop in enumerate(loops):
            ends = (loop.controller, loop.controlled)
            score = sum(1 for component in hits.values() if component in ends)
            score += sum(
                1 for channel in loop_channels[pos] if term_in_text(channel, segment.text)
            )
            scored.append((score, pos))
            best = max(best, score)
        if best == 0:
            assignments.append(LoopAssignment(segment=segment, loop=UNASSIGNED, evidence=()))
            continue
        tied = [pos for score, pos in scored if score == best]
        winner = loops[tied[0]]  # loops are ordered by (controller, controlled)
        ends = (winner.controller, winner.controlled)
        evidence = sorted(term for term, component in hits.items() if component in ends)
        evidence += sorted(
            f"channel:{channel}"
            for channel in loop_channels[tied[0]]
            if term_in_text(channel, segment.text)
        )
        if len(tied) > 1:
            evidence.append(
                f"tie between {len(tied)} loops resolved by smallest component ids"
            )
        assignments.append(
            LoopAssignment(
                segment=segment,
                loop=loop_key(winner.controller, winner.controlled),
                evidence=tuple(evidence),
            )
        )
    return tuple(assignments)


# --- factor extraction ----------------------------------------------------


def extract_causal_factors(
    assignments: Sequence[LoopAssignment],
    rules: Sequence[CausalRule] | None = None,
) -> tuple[CausalFactor, ...]:
    """Run every rule over every assigned segment; unassigned yield nothing.

    A rule fires at most once per segment no matter how many of its terms
    match; the matched terms are recorded sorted, so rule term order never
    changes the result.
    """

    table = load_rules() if rules is None else tuple(rules)
    factors: list[CausalFactor] = []
    for assignment in assignments:
        if not assignment.assigned:
            continue
        controller, controlled = assignment.loop.split("->", 1)
        for rule in table:
            matched = sorted(
                term for term in rule.terms if term_in_text(term, assignment.segment.text)
            )
            if not matched:
                continue
            factors.append(
                CausalFactor(
                    id=f"s{assignment.segment.index:02d}-{rule.id}",
                    loop=assignment.loop,
                    factor_class=rule.factor_class,
                    description=(
                        f"Segment {assignment.segment.index} matches {rule.id}:"
                        f" {', '.join(matched)}."
                    ),
                    violated_constraint=rule.constraint.format(
                        controller=controller, controlled=controlled
                    ),
                    segment_index=assignment.segment.index,
                    rule_id=rule.id,
                    matched_terms=tuple(matched),
                )
            )
    return tuple(factors)


# --- aggregation ----------------------------------------------------------


def aggregate_cast(factors: Sequence[CausalFactor]) -> AggregateCausalStats:
    """Tally factors per class and per loop; order of input is irrelevant.

    Every factor class appears in the class axis, zero counts included,
    in taxonomy order.  Loops appear only when cited, sorted by key.
    Percentages follow the half-up single-decimal rounding used for the
    regulatory tallies; an empty factor list yields all zeros.
    """

    total = len(factors)
    class_counts = Counter(factor.factor_class for factor in factors)
    by_class = tuple(
        CountStat(
            label=factor_class.value,
            count=class_counts.get(factor_class, 0),
            percent=round_percent(class_counts.get(factor_class, 0), total) if total else 0.0,
        )
        for factor_class in FactorClass
    )
    loop_counts = Counter(factor.loop for factor in factors)
    by_loop = tuple(
        CountStat(label=key, count=count, percent=round_percent(count, total))
        for key, count in sorted(loop_counts.items())
    )
    return AggregateCausalStats(total=total, by_class=by_class, by_loop=by_loop)


# --- gateway-assisted extraction -------------------------------------------


@lru_cache(maxsize=1)
def _prompt_template() -> Template:
    return Template(_read_data(PROMPT_TEMPLATE_FILE))


def build_cast_prompt(assignments: Sequence[LoopAssignment]) -> str:
    """Render the factor-extraction prompt; deterministic for equal input."""

    segments = "\n".join(
        f"{a.segment.index}. {a.segment.text}" for a in assignments
    )
    mapping = {
        "factor_classes": ", ".join(c.value for c in FactorClass),
        "segments": segments,
        "assignments": "\n".join(f"{a.segment.index}. {a.loop}" for a in assignments),
    }
    return _prompt_template().substitute(mapping)


def parse_cast_reply(
    reply: str, assignments: Sequence[LoopAssignment]
) -> tuple[CausalFactor, ...]:
    """Validate a gateway reply into factors; any defect raises ParseError.

    The reply must be a JSON array of objects citing assigned segments with
    known factor classes and nonempty descriptions.  Factors built here
    carry rule id ``gateway`` and no matched terms.
    """

    where = "cast gateway reply"
    by_index = {a.segment.index: a for a in assignments}
    try:
        payload = json.loads(reply)
    except ValueError as exc:
        raise ParseError(f"not valid JSON: {exc}", context=where) from exc
    if not isinstance(payload, list):
        raise ParseError("reply must be a JSON array", context=where)
    factors: list[CausalFactor] = []
    per_segment: Counter[int] = Counter()
    for pos, item in enumerate(payload):
        if not isinstance(item, dict):
            raise ParseError(f"entry {pos} must be an object", context=where)
        index = item.get("segment")
        if isinstance(index, bool) or not isinstance(index, int):
            raise ParseError(f"entry {pos}: segment must be an integer", context=where)
        assignment = by_index.get(index)
        if assignment is None:
            raise ParseError(f"entry {pos}: unknown segment {index}", context=where)
        if not assignment.assigned:
            raise ParseError(
                f"entry {pos}: segment {index} is not assigned to a loop", context=where
            )
        try:
            factor_class = FactorClass(str(item.get("factor_class")))
        except ValueError as exc:
            raise ParseError(
                f"entry {pos}: unknown factor class {item.get('factor_class')!r}",
                context=where,
            ) from exc
        description = item.get("description")
        if not isinstance(description, str) or not description.strip():
            raise ParseError(f"entry {pos}: description must be nonempty", context=where)
        controller, controlled = assignment.loop.split("->", 1)
        occurrence = per_segment[index]
        per_segment[index] += 1
        factors.append(
            CausalFactor(
                id=f"s{index:02d}-gateway-{occurrence}",
                loop=assignment.loop,
                factor_class=factor_class,
                description=description.strip(),
                violated_constraint=_CLASS_CONSTRAINTS[factor_class].format(
                    controller=controller, controlled=controlled
                ),
                segment_index=index,
                rule_id="gateway",
                matched_terms=(),
            )
        )
    return tuple(factors)


def analyze_narrative(
    narrative: str,
    structure: ControlStructure,
    *,
    lexicon: Mapping[str, str] | None = None,
    rules: Sequence[CausalRule] | None = None,
    gateway: Gateway | None = None,
    max_retries: int = 2,
) -> CastAnalysis:
    """Segment, map, and extract factors for one narrative.

    Without a gateway the rules run directly and the result is marked
    :attr:`Provenance.Fallback`.  With a gateway, ``max_retries`` total
    attempts are made; every failed attempt leaves a warning and the rules
    take over when all attempts are spent, so gateway trouble never raises.
    """

    segments = segment_narrative(narrative)
    assignments = map_segments(segments, structure, lexicon=lexicon)
    warnings: list[str] = []
    provenance = Provenance.Fallback
    factors: tuple[CausalFactor, ...] | None = None
    if gateway is not None:
        if max_retries < 1:
            raise ValidationError("max_retries must be at least 1")
        prompt = build_cast_prompt(assignments)
        for attempt in range(1, max_retries + 1):
            try:
                reply = gateway.complete(prompt)
            except GatewayError as exc:
                warnings.append(f"attempt {attempt}: gateway transport failure: {exc}")
                continue
            except Exception as exc:  # noqa: BLE001 - degrade, never crash
                warnings.append(
                    f"attempt {attempt}: gateway raised {type(exc).__name__}: {exc}"
                )
                continue
            try:
                factors = parse_cast_reply(reply, assignments)
            except ParseError as exc:
                warnings.append(f"attempt {attempt}: reply rejected: {exc}")
                continue
            provenance = Provenance.Gateway
            break
        if factors is None:
            warnings.append(
                f"gateway output unusable after {max_retries} attempt(s);"
                " using rule extraction"
            )
    if factors is None:
        factors = extract_causal_factors(assignments, rules=rules)
    return CastAnalysis(
        narrative=narrative,
        segments=segments,
        assignments=assignments,
        factors=factors,
        stats=aggregate_cast(factors),
        provenance=provenance,
        warnings=tuple(warnings),
    )


# --- rendering ------------------------------------------------------------


def format_cast_text(analysis: CastAnalysis) -> str:
    """Plain-text rendering for the CLI; byte-deterministic."""

    assigned = sum(1 for a in analysis.assignments if a.assigned)
    lines = [
        f"Causal analysis [{analysis.provenance.value}]",
        f"Segments: {len(analysis.segments)} total, {assigned} assigned",
    ]
    for assignment in analysis.assignments:
        lines.append(
            f"{assignment.segment.index:>3}. [{assignment.loop}] {assignment.segment.text}"
        )
    lines.append(f"Factors: {analysis.stats.total}")
    for factor in analysis.factors:
        lines.append(f"  - {factor.id} [{factor.factor_class.value}] {factor.description}")
        lines.append(f"    constraint: {factor.violated_constraint}")
    lines.append("Factor classes:")
    for stat in analysis.stats.by_class:
        lines.append(f"  {stat.label}: {stat.count} ({stat.percent}%)")
    if analysis.stats.by_loop:
        lines.append("Loops cited:")
        for stat in analysis.stats.by_loop:
            lines.append(f"  {stat.label}: {stat.count} ({stat.percent}%)")
    if analysis.warnings:
        lines.append("Warnings:")
        for warning in analysis.warnings:
            lines.append(f"  - {warning}")
    return "\n".join(lines) + "\n"


# --- serialization --------------------------------------------------------


def _require(raw: Mapping[str, object], field_name: str, where: str) -> object:
    if field_name not in raw:
        raise ParseError(f"missing field {field_name!r}", context=where)
    return raw[field_name]


def segment_to_dict(segment: NarrativeSegment) -> dict[str, object]:
    return {
        "index": segment.index,
        "text": segment.text,
        "char_range": list(segment.char_range),
    }


def segment_from_dict(raw: Mapping[str, object]) -> NarrativeSegment:
    where = "narrative segment"
    index = _require(raw, "index", where)
    text = _require(raw, "text", where)
    char_range = _require(raw, "char_range", where)
    if not isinstance(char_range, (list, tuple)) or len(char_range) != 2:
        raise ParseError("char_range must be a two-item list", context=where)
    try:
        return NarrativeSegment(
            index=int(index),  # type: ignore[arg-type]
            text=str(text),
            char_range=(int(char_range[0]), int(char_range[1])),  # type: ignore[arg-type]
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def assignment_to_dict(assignment: LoopAssignment) -> dict[str, object]:
    return {
        "segment": segment_to_dict(assignment.segment),
        "loop": assignment.loop,
        "evidence": list(assignment.evidence),
    }


def assignment_from_dict(raw: Mapping[str, object]) -> LoopAssignment:
    where = "loop assignment"
    segment = _require(raw, "segment", where)
    loop = _require(raw, "loop", where)
    evidence = _require(raw, "evidence", where)
    if not isinstance(segment, Mapping):
        raise ParseError("segment must be an object", context=where)
    if not isinstance(evidence, list):
        raise ParseError("evidence must be a list", context=where)
    try:
        return LoopAssignment(
            segment=segment_from_dict(segment),
            loop=str(loop),
            evidence=tuple(str(e) for e in evidence),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), context=where) from exc


def factor_to_dict(factor: CausalFactor) -> dict[str, object]:
    return {
        "id": factor.id,
        "loop": factor.loop,
        "factor_class": factor.factor_class.value,
        "description": factor.description,
        "violated_constraint": factor.violated_constraint,
        "segment_index": factor.segment_index,
        "rule_id": factor.rule_id,
        "matched_terms": list(factor.matched_terms),
    }


def factor_from_dict(raw: Mapping[str, object]) -> CausalFactor:
    where = "causal factor"
    matched = _require(raw, "matched_terms", where)
    if not isinstance(matched, list):
        raise ParseError("matched_terms must be a list", context=where)
    try:
        return CausalFactor(
            id=str(_require(raw, "id", where)),
            loop=str(_require(raw, "loop", where)),
            factor_class=FactorClass(str(_require(raw, "factor_class", where))),
            description=str(_require(raw, "description", where)),
            violated_constraint=str(_require(raw, "violated_constraint", where)),
            segment_index=int(_require(raw, "segment_index", where)),  # type: ignore[arg-type]
            rule_id=str(_require(raw, "rule_id", where)),
            matched_terms=tuple(str(t) for t in matched),
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def stats_to_dict(stats: AggregateCausalStats) -> dict[str, object]:
    return {
        "total": stats.total,
        "by_class": [
            {"label": s.label, "count": s.count, "percent": s.percent} for s in stats.by_class
        ],
        "by_loop": [
            {"label": s.label, "count": s.count, "percent": s.percent} for s in stats.by_loop
        ],
    }


def _stats_axis(raw: object, where: str) -> tuple[CountStat, ...]:
    if not isinstance(raw, list):
        raise ParseError("stats axis must be a list", context=where)
    stats = []
    for entry in raw:
        if not isinstance(entry, Mapping):
            raise ParseError("stats entry must be an object", context=where)
        stats.append(
            CountStat(
                label=str(_require(entry, "label", where)),
                count=int(_require(entry, "count", where)),  # type: ignore[arg-type]
                percent=float(_require(entry, "percent", where)),  # type: ignore[arg-type]
            )
        )
    return tuple(stats)


def stats_from_dict(raw: Mapping[str, object]) -> AggregateCausalStats:
    where = "aggregate causal stats"
    try:
        return AggregateCausalStats(
            total=int(_require(raw, "total", where)),  # type: ignore[arg-type]
            by_class=_stats_axis(_require(raw, "by_class", where), where),
            by_loop=_stats_axis(_require(raw, "by_loop", where), where),
        )
    except (TypeError, ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def cast_to_dict(analysis: CastAnalysis) -> dict[str, object]:
    return {
        "narrative": analysis.narrative,
        "segments": [segment_to_dict(s) for s in analysis.segments],
        "assignments": [assignment_to_dict(a) for a in analysis.assignments],
        "factors": [factor_to_dict(f) for f in analysis.factors],
        "stats": stats_to_dict(analysis.stats),
        "provenance": analysis.provenance.value,
        "warnings": list(analysis.warnings),
    }


def cast_from_dict(raw: Mapping[str, object]) -> CastAnalysis:
    where = "causal analysis"
    segments = _require(raw, "segments", where)
    assignments = _require(raw, "assignments", where)
    factors = _require(raw, "factors", where)
    stats = _require(raw, "stats", where)
    warnings = _require(raw, "warnings", where)
    for name, value in (
        ("segments", segments),
        ("assignments", assignments),
        ("factors", factors),
        ("warnings", warnings),
    ):
        if not isinstance(value, list):
            raise ParseError(f"{name} must be a list", context=where)
    if not isinstance(stats, Mapping):
        raise ParseError("stats must be an object", context=where)
    try:
        return CastAnalysis(
            narrative=str(_require(raw, "narrative", where)),
            segments=tuple(segment_from_dict(s) for s in segments),
            assignments=tuple(assignment_from_dict(a) for a in assignments),
            factors=tuple(factor_from_dict(f) for f in factors),
            stats=stats_from_dict(stats),
            provenance=Provenance(str(_require(raw, "provenance", where))),
            warnings=tuple(str(w) for w in warnings),
        )
    except (ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc
