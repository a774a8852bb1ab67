"""Technology inventory: questionnaires, profiles, ML technique inference.

A security reviewer rarely gets a bill of materials for a medical device;
they get marketing text and whatever a structured questionnaire can extract
from the vendor.  This module turns those answers into a
:class:`TechnologyProfile` per component, derives the search keywords that
drive vulnerability retrieval, guesses the ML technique when the vendor does
not declare one, and looks up known attack patterns against that technique.

The inference tables and the attack knowledge base ship as versioned JSON
under ``meddevsec/data`` so they can be reviewed and extended without code
changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import IncompleteQuestionnaireError, NotFoundError, ValidationError
from .textmatch import head_token, normalize_term, term_in_text


class MLTechnique(str, Enum):
    ReinforcementLearning = "Reinforcement learning"
    DeepNeuralNetwork = "Deep Neural Network"
    CNN = "CNN"
    RNNLSTM = "RNN/LSTM"
    SVM = "SVM"
    KMeansClustering = "k-means clustering"
    GradientBoosting = "Gradient boosting"
    LogisticRegression = "Logistic regression"
    Other = "Other"


class Confidence(str, Enum):
    Declared = "Declared"
    Inferred = "Inferred"


class AttackClass(str, Enum):
    DataPoisoning = "DataPoisoning"
    ModelInversionOrStealing = "ModelInversionOrStealing"
    ModelEvasion = "ModelEvasion"
    DataLeakage = "DataLeakage"
    Overfitting = "Overfitting"
    ModelBias = "ModelBias"
    PerformanceDrift = "PerformanceDrift"


class AttackPhase(str, Enum):
    TrainingTime = "TrainingTime"
    InferenceTime = "InferenceTime"


class ConditionKind(str, Enum):
    CommunicationLink = "CommunicationLink"
    InputDeviceClass = "InputDeviceClass"
    OperatingSystem = "OperatingSystem"
    Other = "Other"


# Attack classes whose phase is fixed by definition; the KB loader rejects
# entries that disagree.
_PHASE_BY_CLASS: dict[AttackClass, AttackPhase] = {
    AttackClass.DataPoisoning: AttackPhase.TrainingTime,
    AttackClass.ModelEvasion: AttackPhase.InferenceTime,
}

QUESTIONNAIRE_GROUPS = ("human_interaction", "communication", "em_susceptibility", "dependencies")

UNKNOWN = "unknown"


@dataclass(frozen=True)
class CompatibilityCondition:
    component: str
    condition_kind: ConditionKind
    value: str

    def __post_init__(self) -> None:
        if not self.value.strip():
            raise ValidationError(
                f"compatibility condition for {self.component}: value must be nonempty"
            )


@dataclass(frozen=True)
class HumanInteraction:
    """Answers about people in the loop; None means explicitly unknown."""

    data_entry: bool | None = None
    validation: bool | None = None
    authentication: bool | None = None
    anomaly_detection: bool | None = None
    notes: str = ""


@dataclass(frozen=True)
class Communication:
    protocol: str = ""
    version: str = ""
    encrypted: bool | None = None

    def __post_init__(self) -> None:
        if self.version.strip() and not self.protocol.strip():
            raise ValidationError("communication version given without a protocol name")


@dataclass(frozen=True)
class EMSusceptibility:
    susceptible: bool | None = None
    impact: str = ""
    mitigation: str = ""


@dataclass(frozen=True)
class Dependency:
    name: str
    version: str = ""

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValidationError("dependency name must be nonempty")


@dataclass(frozen=True)
class Dependencies:
    operating_system: tuple[Dependency, ...] = ()
    firmware: tuple[Dependency, ...] = ()
    hardware: tuple[Dependency, ...] = ()
    libraries: tuple[Dependency, ...] = ()


@dataclass(frozen=True)
class TechnologyProfile:
    component: str
    human_interaction: HumanInteraction
    communication: Communication
    em_susceptibility: EMSusceptibility
    dependencies: Dependencies
    compatibility: tuple[CompatibilityCondition, ...] = ()


@dataclass(frozen=True)
class MLTechniqueDescriptor:
    technique: MLTechnique
    confidence: Confidence
    evidence: tuple[str, ...]
    score: float


@dataclass(frozen=True)
class MLAttackPattern:
    id: str
    name: str
    attack_class: AttackClass
    phase: AttackPhase
    applicable_techniques: tuple[MLTechnique, ...]
    summary: str
    source: str


def _data_text(filename: str) -> str:
    return (resources.files("meddevsec") / "data" / filename).read_text(encoding="utf-8")


# --- questionnaire compilation -------------------------------------------


def _tri(value: object, where: str) -> bool | None:
    if value is None or value == UNKNOWN:
        return None
    if isinstance(value, bool):
        return value
    raise ValidationError(f"{where}: expected true/false/'unknown', got {value!r}")


def _deps(raw: object, where: str) -> tuple[Dependency, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ValidationError(f"{where}: expected a list of dependencies")
    out = []
    for entry in raw:
        if isinstance(entry, str):
            out.append(Dependency(name=entry))
        elif isinstance(entry, dict):
            out.append(Dependency(name=str(entry.get("name", "")), version=str(entry.get("version", ""))))
        else:
            raise ValidationError(f"{where}: bad dependency entry {entry!r}")
    return tuple(out)


def compile_profile(component: str, responses: Mapping[str, object]) -> TechnologyProfile:
    """Build a profile from questionnaire responses for one component.

    Every factor group must be present, either answered or set to the literal
    string ``"unknown"``; silently missing groups raise
    :class:`IncompleteQuestionnaireError` naming them.  A fully unknown
    questionnaire is a valid profile that simply yields no search keywords.
    """
    missing = [g for g in QUESTIONNAIRE_GROUPS if g not in responses]
    if missing:
        raise IncompleteQuestionnaireError(missing)

    def group(name: str) -> Mapping[str, object]:
        raw = responses[name]
        if raw == UNKNOWN:
            return {}
        if not isinstance(raw, Mapping):
            raise ValidationError(f"group {name!r}: expected an object or 'unknown'")
        return raw

    hi_raw = group("human_interaction")
    human = HumanInteraction(
        data_entry=_tri(hi_raw.get("data_entry"), "human_interaction.data_entry"),
        validation=_tri(hi_raw.get("validation"), "human_interaction.validation"),
        authentication=_tri(hi_raw.get("authentication"), "human_interaction.authentication"),
        anomaly_detection=_tri(
            hi_raw.get("anomaly_detection"), "human_interaction.anomaly_detection"
        ),
        notes=str(hi_raw.get("notes", "")),
    )
    comm_raw = group("communication")
    communication = Communication(
        protocol=str(comm_raw.get("protocol", "")),
        version=str(comm_raw.get("version", "")),
        encrypted=_tri(comm_raw.get("encrypted"), "communication.encrypted"),
    )
    em_raw = group("em_susceptibility")
    em = EMSusceptibility(
        susceptible=_tri(em_raw.get("susceptible"), "em_susceptibility.susceptible"),
        impact=str(em_raw.get("impact", "")),
        mitigation=str(em_raw.get("mitigation", "")),
    )
    dep_raw = group("dependencies")
    deps = Dependencies(
        operating_system=_deps(dep_raw.get("operating_system"), "dependencies.operating_system"),
        firmware=_deps(dep_raw.get("firmware"), "dependencies.firmware"),
        hardware=_deps(dep_raw.get("hardware"), "dependencies.hardware"),
        libraries=_deps(dep_raw.get("libraries"), "dependencies.libraries"),
    )
    conditions: list[CompatibilityCondition] = []
    if communication.protocol.strip():
        label = communication.protocol.strip()
        if communication.version.strip():
            label += f" {communication.version.strip()}"
        conditions.append(
            CompatibilityCondition(component, ConditionKind.CommunicationLink, label)
        )
    for dep in deps.operating_system:
        label = dep.name if not dep.version else f"{dep.name} {dep.version}"
        conditions.append(CompatibilityCondition(component, ConditionKind.OperatingSystem, label))
    for dep in deps.hardware:
        label = dep.name if not dep.version else f"{dep.name} {dep.version}"
        conditions.append(CompatibilityCondition(component, ConditionKind.InputDeviceClass, label))
    return TechnologyProfile(
        component=component,
        human_interaction=human,
        communication=communication,
        em_susceptibility=em,
        dependencies=deps,
        compatibility=tuple(conditions),
    )


def derive_search_keywords(profile: TechnologyProfile) -> list[str]:
    """Normalized keywords for vulnerability retrieval, deterministic order.

    Groups are walked as operating systems, communication protocol, firmware,
    hardware, then libraries; within a group, answer order is kept.  Each term
    is lowercased and trimmed; a term with a version yields the versioned and
    unversioned forms; every multiword term additionally yields its head
    token, so "Android 13" contributes "android 13" and "android".
    """
    ordered: list[str] = []

    def push(term: str) -> None:
        norm = normalize_term(term)
        if norm and norm not in ordered:
            ordered.append(norm)

    def push_dep(dep: Dependency) -> None:
        name = normalize_term(dep.name)
        if not name:
            return
        if dep.version.strip():
            push(f"{name} {dep.version}")
        push(name)
        push(head_token(name))

    for dep in profile.dependencies.operating_system:
        push_dep(dep)
    comm = profile.communication
    if comm.protocol.strip():
        push_dep(Dependency(name=comm.protocol, version=comm.version))
    for dep in profile.dependencies.firmware:
        push_dep(dep)
    for dep in profile.dependencies.hardware:
        push_dep(dep)
    for dep in profile.dependencies.libraries:
        push_dep(dep)
    return ordered


# --- ML technique inference ----------------------------------------------


@lru_cache(maxsize=1)
def _technique_tables() -> tuple[dict[MLTechnique, tuple[str, ...]], dict[MLTechnique, tuple[str, ...]]]:
    raw = json.loads(_data_text("technique_inference.json"))
    listed = [MLTechnique(t) for t in raw["techniques"]]
    if listed != list(MLTechnique):
        raise ValidationError("technique_inference.json: taxonomy out of sync with enum")
    aliases = {t: tuple(raw["aliases"].get(t.value, ())) for t in MLTechnique}
    evidence = {t: tuple(raw["evidence"].get(t.value, ())) for t in MLTechnique}
    return aliases, evidence


TAXONOMY_ORDER = {t: i for i, t in enumerate(MLTechnique)}


def infer_ml_technique(description: str) -> list[MLTechniqueDescriptor]:
    """Identify the ML technique(s) a free-text device description implies.

    A technique named verbatim (canonical name or listed alias, token
    boundaries, case-insensitive) is returned as Declared and suppresses
    keyword inference entirely.  Otherwise techniques are scored by their
    evidence keywords and returned Inferred, highest score first, ties in
    taxonomy order.  When nothing matches at all the single entry Other is
    returned so callers always get an answer they can override.
    """
    if not description or not description.strip():
        raise ValidationError("description must be nonempty")
    aliases, evidence = _technique_tables()
    declared: list[MLTechniqueDescriptor] = []
    for technique in MLTechnique:
        hits = [
            term
            for term in (technique.value, *aliases[technique])
            if term and term_in_text(term, description)
        ]
        if hits:
            declared.append(
                MLTechniqueDescriptor(
                    technique=technique,
                    confidence=Confidence.Declared,
                    evidence=tuple(dict.fromkeys(hits)),
                    score=float(len(hits)),
                )
            )
    if declared:
        return declared
    inferred: list[MLTechniqueDescriptor] = []
    for technique in MLTechnique:
        hits = tuple(term for term in evidence[technique] if term_in_text(term, description))
        if hits:
            inferred.append(
                MLTechniqueDescriptor(
                    technique=technique,
                    confidence=Confidence.Inferred,
                    evidence=hits,
                    score=float(len(hits)),
                )
            )
    inferred.sort(key=lambda d: (-d.score, TAXONOMY_ORDER[d.technique]))
    if not inferred:
        return [
            MLTechniqueDescriptor(
                technique=MLTechnique.Other, confidence=Confidence.Inferred, evidence=(), score=0.0
            )
        ]
    return inferred


# --- attack knowledge base ------------------------------------------------


@lru_cache(maxsize=1)
def load_attack_kb() -> tuple[MLAttackPattern, ...]:
    """Load and validate the shipped attack knowledge base."""
    raw = json.loads(_data_text("ml_attack_kb.json"))
    patterns: list[MLAttackPattern] = []
    seen: set[str] = set()
    for entry in raw["patterns"]:
        pattern = MLAttackPattern(
            id=entry["id"],
            name=entry["name"],
            attack_class=AttackClass(entry["attack_class"]),
            phase=AttackPhase(entry["phase"]),
            applicable_techniques=tuple(MLTechnique(t) for t in entry["applicable_techniques"]),
            summary=entry["summary"],
            source=entry["source"],
        )
        if pattern.id in seen:
            raise ValidationError(f"attack KB: duplicate id {pattern.id!r}")
        seen.add(pattern.id)
        if not pattern.summary.strip() or not pattern.source.strip():
            raise ValidationError(f"attack KB {pattern.id}: summary and source must be nonempty")
        if not pattern.applicable_techniques:
            raise ValidationError(f"attack KB {pattern.id}: must apply to at least one technique")
        fixed = _PHASE_BY_CLASS.get(pattern.attack_class)
        if fixed is not None and pattern.phase is not fixed:
            raise ValidationError(
                f"attack KB {pattern.id}: {pattern.attack_class.value} must be {fixed.value}"
            )
        patterns.append(pattern)
    patterns.sort(key=lambda p: p.id)
    return tuple(patterns)


def get_attack_pattern(pattern_id: str) -> MLAttackPattern:
    for pattern in load_attack_kb():
        if pattern.id == pattern_id:
            return pattern
    raise NotFoundError(f"unknown attack pattern {pattern_id!r}")


def lookup_ml_attacks(
    technique: MLTechnique | str, phase: AttackPhase | str | None = None
) -> tuple[MLAttackPattern, ...]:
    """Attack patterns applicable to a technique, optionally phase-filtered.

    Results are ordered by pattern id.  An unknown technique name raises
    :class:`ValidationError` rather than returning an empty list, since an
    empty list is a meaningful answer.
    """
    try:
        tech = technique if isinstance(technique, MLTechnique) else MLTechnique(technique)
    except ValueError as exc:
        raise ValidationError(f"unknown ML technique {technique!r}") from exc
    phase_filter: AttackPhase | None
    if phase is None:
        phase_filter = None
    else:
        try:
            phase_filter = phase if isinstance(phase, AttackPhase) else AttackPhase(phase)
        except ValueError as exc:
            raise ValidationError(f"unknown attack phase {phase!r}") from exc
    return tuple(
        p
        for p in load_attack_kb()
        if tech in p.applicable_techniques
        and (phase_filter is None or p.phase is phase_filter)
    )


# --- persistence ----------------------------------------------------------


def _dep_to_dict(dep: Dependency) -> dict[str, str]:
    return {"name": dep.name, "version": dep.version}


def profile_to_dict(profile: TechnologyProfile) -> dict[str, object]:
    def tri(value: bool | None) -> object:
        return UNKNOWN if value is None else value

    return {
        "component": profile.component,
        "human_interaction": {
            "data_entry": tri(profile.human_interaction.data_entry),
            "validation": tri(profile.human_interaction.validation),
            "authentication": tri(profile.human_interaction.authentication),
            "anomaly_detection": tri(profile.human_interaction.anomaly_detection),
            "notes": profile.human_interaction.notes,
        },
        "communication": {
            "protocol": profile.communication.protocol,
            "version": profile.communication.version,
            "encrypted": tri(profile.communication.encrypted),
        },
        "em_susceptibility": {
            "susceptible": tri(profile.em_susceptibility.susceptible),
            "impact": profile.em_susceptibility.impact,
            "mitigation": profile.em_susceptibility.mitigation,
        },
        "dependencies": {
            "operating_system": [_dep_to_dict(d) for d in profile.dependencies.operating_system],
            "firmware": [_dep_to_dict(d) for d in profile.dependencies.firmware],
            "hardware": [_dep_to_dict(d) for d in profile.dependencies.hardware],
            "libraries": [_dep_to_dict(d) for d in profile.dependencies.libraries],
        },
    }


def profile_from_dict(raw: Mapping[str, object]) -> TechnologyProfile:
    return compile_profile(str(raw["component"]), raw)


def attack_pattern_to_dict(pattern: MLAttackPattern) -> dict[str, object]:
    return {
        "id": pattern.id,
        "name": pattern.name,
        "attack_class": pattern.attack_class.value,
        "phase": pattern.phase.value,
        "applicable_techniques": [t.value for t in pattern.applicable_techniques],
        "summary": pattern.summary,
        "source": pattern.source,
    }


def attack_pattern_from_dict(raw: Mapping[str, object]) -> MLAttackPattern:
    where = f"attack pattern {raw.get('id', '?')}"
    techniques = raw.get("applicable_techniques", [])
    if not isinstance(techniques, list):
        raise ValidationError(f"{where}: applicable_techniques must be an array")
    try:
        return MLAttackPattern(
            id=str(raw["id"]),
            name=str(raw["name"]),
            attack_class=AttackClass(str(raw["attack_class"])),
            phase=AttackPhase(str(raw["phase"])),
            applicable_techniques=tuple(MLTechnique(str(t)) for t in techniques),
            summary=str(raw.get("summary", "")),
            source=str(raw.get("source", "")),
        )
    except KeyError as exc:
        raise ValidationError(f"{where}: missing field {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
