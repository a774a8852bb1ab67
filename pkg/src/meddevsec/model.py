"""Hierarchical control-structure model for ML-enabled medical devices.

The model captures a device as controllers, controlled processes, and the
control/feedback/data links between them, plus the losses, hazards, and
unsafe control actions an analyst records against that structure.  Values are
immutable: every edit returns a new structure, so callers can keep cheap
snapshots and the service layer can diff revisions safely.

Structural rules enforced at construction time (ids unique, link endpoints
exist, no self-loops, control actions only issued by controller kinds) are
distinct from review rules evaluated by :func:`validate` (an ML controller
must exist and must have data inputs and outputs).  Review rules produce
:class:`Violation` records as data instead of raising, because an analyst
mid-edit legitimately holds a structure that does not review clean yet.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping

from .errors import ConflictError, NotFoundError, ParseError, ValidationError

STRUCTURE_SCHEMA_VERSION = 1

_ID_MAX = 64


class ComponentKind(str, Enum):
    Patient = "Patient"
    HumanOperator = "HumanOperator"
    Sensor = "Sensor"
    InterfaceDevice = "InterfaceDevice"
    MLController = "MLController"
    NonMLController = "NonMLController"
    CloudService = "CloudService"
    Actuator = "Actuator"
    NetworkElement = "NetworkElement"


class LinkKind(str, Enum):
    ControlAction = "ControlAction"
    Feedback = "Feedback"
    DataFlow = "DataFlow"


# Only these kinds may issue control actions.
CONTROLLER_KINDS = frozenset(
    {ComponentKind.MLController, ComponentKind.NonMLController, ComponentKind.HumanOperator}
)


class UCAGuideword(str, Enum):
    NotProvided = "NotProvided"
    ProvidedCausesHazard = "ProvidedCausesHazard"
    WrongTimingOrOrder = "WrongTimingOrOrder"
    StoppedTooSoonOrAppliedTooLong = "StoppedTooSoonOrAppliedTooLong"


def _check_id(value: str, what: str) -> None:
    if not value or not value.strip():
        raise ValidationError(f"{what} id must be a nonempty string")
    if len(value) > _ID_MAX:
        raise ValidationError(f"{what} id {value!r} exceeds {_ID_MAX} characters")
    if value != value.strip():
        raise ValidationError(f"{what} id {value!r} has surrounding whitespace")


@dataclass(frozen=True)
class Component:
    id: str
    name: str
    kind: ComponentKind
    notes: str = ""

    def __post_init__(self) -> None:
        _check_id(self.id, "component")
        if not self.name.strip():
            raise ValidationError(f"component {self.id}: name must be nonempty")
        if not isinstance(self.kind, ComponentKind):
            object.__setattr__(self, "kind", ComponentKind(self.kind))


@dataclass(frozen=True)
class Link:
    id: str
    source: str
    target: str
    kind: LinkKind
    channel: str | None = None

    def __post_init__(self) -> None:
        _check_id(self.id, "link")
        if not isinstance(self.kind, LinkKind):
            object.__setattr__(self, "kind", LinkKind(self.kind))
        if self.source == self.target:
            raise ValidationError(f"link {self.id}: source and target must differ")


@dataclass(frozen=True)
class Loss:
    id: str
    description: str

    def __post_init__(self) -> None:
        _check_id(self.id, "loss")
        if not self.description.strip():
            raise ValidationError(f"loss {self.id}: description must be nonempty")


@dataclass(frozen=True)
class Hazard:
    id: str
    description: str
    linked_losses: tuple[str, ...]

    def __post_init__(self) -> None:
        _check_id(self.id, "hazard")
        object.__setattr__(self, "linked_losses", tuple(self.linked_losses))
        if not self.description.strip():
            raise ValidationError(f"hazard {self.id}: description must be nonempty")
        if not self.linked_losses:
            raise ValidationError(f"hazard {self.id}: must link at least one loss")


@dataclass(frozen=True)
class UnsafeControlAction:
    id: str
    control_action: str
    guideword: UCAGuideword
    hazards: tuple[str, ...]
    description: str

    def __post_init__(self) -> None:
        _check_id(self.id, "unsafe control action")
        if not isinstance(self.guideword, UCAGuideword):
            object.__setattr__(self, "guideword", UCAGuideword(self.guideword))
        object.__setattr__(self, "hazards", tuple(self.hazards))
        if not self.hazards:
            raise ValidationError(f"unsafe control action {self.id}: must cite a hazard")
        if not self.description.strip():
            raise ValidationError(f"unsafe control action {self.id}: description must be nonempty")


@dataclass(frozen=True)
class ControlLoop:
    controller: str
    controlled: str
    action_path: tuple[str, ...]
    feedback_path: tuple[str, ...]


@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str


@dataclass(frozen=True)
class ControlStructure:
    device_name: str
    components: tuple[Component, ...]
    links: tuple[Link, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.device_name.strip():
            raise ValidationError("device_name must be nonempty")
        comps = tuple(sorted(self.components, key=lambda c: c.id))
        links = tuple(sorted(self.links, key=lambda l: l.id))
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "metadata", dict(self.metadata))
        seen: set[str] = set()
        for comp in comps:
            if comp.id in seen:
                raise ConflictError(f"duplicate component id {comp.id!r}")
            seen.add(comp.id)
        by_id = {c.id: c for c in comps}
        seen_links: set[str] = set()
        for link in links:
            if link.id in seen_links:
                raise ConflictError(f"duplicate link id {link.id!r}")
            seen_links.add(link.id)
            for end in (link.source, link.target):
                if end not in by_id:
                    raise NotFoundError(f"link {link.id}: unknown component {end!r}")
            if link.kind is LinkKind.ControlAction and by_id[link.source].kind not in CONTROLLER_KINDS:
                raise ValidationError(
                    f"link {link.id}: control actions must originate from a controller kind, "
                    f"not {by_id[link.source].kind.value}"
                )

    def component(self, component_id: str) -> Component:
        for comp in self.components:
            if comp.id == component_id:
                return comp
        raise NotFoundError(f"unknown component {component_id!r}")

    def link(self, link_id: str) -> Link:
        for link in self.links:
            if link.id == link_id:
                return link
        raise NotFoundError(f"unknown link {link_id!r}")

    def has_component(self, component_id: str) -> bool:
        return any(c.id == component_id for c in self.components)

    def components_by_kind(self, kind: ComponentKind) -> tuple[Component, ...]:
        return tuple(c for c in self.components if c.kind is kind)


# --- template -----------------------------------------------------------

_TEMPLATE_COMPONENTS = (
    ("patient", "Patient", ComponentKind.Patient),
    ("sensor", "Sensor", ComponentKind.Sensor),
    ("interface", "Interface Device", ComponentKind.InterfaceDevice),
    ("ml_controller", "ML Controller", ComponentKind.MLController),
    ("cloud", "Cloud Service", ComponentKind.CloudService),
    ("actuator", "Actuator", ComponentKind.Actuator),
    ("physician", "Physician", ComponentKind.HumanOperator),
    ("network", "Network Element", ComponentKind.NetworkElement),
)

_TEMPLATE_LINKS_COMMON = (
    ("patient_to_sensor", "patient", "sensor", LinkKind.Feedback, None),
    ("ml_to_actuator", "ml_controller", "actuator", LinkKind.ControlAction, None),
    ("ml_to_interface", "ml_controller", "interface", LinkKind.DataFlow, None),
    ("actuator_to_patient", "actuator", "patient", LinkKind.DataFlow, None),
    ("interface_to_cloud", "interface", "cloud", LinkKind.DataFlow, None),
    ("cloud_to_interface", "cloud", "interface", LinkKind.DataFlow, None),
    ("physician_to_interface", "physician", "interface", LinkKind.ControlAction, None),
    ("network_to_interface", "network", "interface", LinkKind.DataFlow, None),
)

_TEMPLATE_LINKS_DEVICE = (
    ("sensor_to_ml", "sensor", "ml_controller", LinkKind.DataFlow, None),
    ("interface_to_ml", "interface", "ml_controller", LinkKind.DataFlow, None),
)

_TEMPLATE_LINKS_CLOUD = (
    ("sensor_to_network", "sensor", "network", LinkKind.DataFlow, "wifi"),
    ("network_to_cloud", "network", "cloud", LinkKind.DataFlow, None),
    ("cloud_to_ml", "cloud", "ml_controller", LinkKind.DataFlow, None),
)


def new_from_template(device_name: str, ml_location: str = "device") -> ControlStructure:
    """Instantiate the canonical eight-component structure for a named device.

    ``ml_location`` selects where the inference engine sits and therefore how
    sensor data reaches it:

    * ``"device"``: the model runs on the patient-side equipment; the sensor
      and interface feed it directly.
    * ``"cloud"``: the model runs server-side; readings travel sensor ->
      network -> cloud -> ML controller, and the interface reaches it through
      the cloud sync links.

    Both variants contain the same eight components (patient, sensor,
    interface device, ML controller, cloud service, actuator, physician,
    network element) and both pass :func:`validate` with no violations.
    """
    if ml_location not in ("device", "cloud"):
        raise ValidationError(f"unknown ml_location {ml_location!r}; expected 'device' or 'cloud'")
    extra = _TEMPLATE_LINKS_DEVICE if ml_location == "device" else _TEMPLATE_LINKS_CLOUD
    components = tuple(Component(id=i, name=n, kind=k) for i, n, k in _TEMPLATE_COMPONENTS)
    links = tuple(
        Link(id=i, source=s, target=t, kind=k, channel=c)
        for i, s, t, k, c in (_TEMPLATE_LINKS_COMMON + extra)
    )
    return ControlStructure(
        device_name=device_name,
        components=components,
        links=links,
        metadata={"ml_location": ml_location},
    )


# --- edit operations ----------------------------------------------------


@dataclass(frozen=True)
class AddComponent:
    component: Component


@dataclass(frozen=True)
class RemoveComponent:
    component_id: str


@dataclass(frozen=True)
class AddLink:
    link: Link


@dataclass(frozen=True)
class RemoveLink:
    link_id: str


@dataclass(frozen=True)
class Rename:
    component_id: str
    new_name: str


EditOperation = AddComponent | RemoveComponent | AddLink | RemoveLink | Rename


def edit(structure: ControlStructure, operation: EditOperation) -> ControlStructure:
    """Apply one operation and return the resulting structure.

    Dangling references raise :class:`NotFoundError`, id collisions raise
    :class:`ConflictError`, and constraint breaches (self-loop, control action
    from a non-controller) raise :class:`ValidationError`.  The input value is
    never modified.
    """
    if isinstance(operation, AddComponent):
        if structure.has_component(operation.component.id):
            raise ConflictError(f"duplicate component id {operation.component.id!r}")
        return replace(structure, components=structure.components + (operation.component,))
    if isinstance(operation, RemoveComponent):
        structure.component(operation.component_id)
        remaining = tuple(c for c in structure.components if c.id != operation.component_id)
        # Incident links go with the component so no dangling endpoint survives.
        links = tuple(
            l
            for l in structure.links
            if l.source != operation.component_id and l.target != operation.component_id
        )
        return replace(structure, components=remaining, links=links)
    if isinstance(operation, AddLink):
        if any(l.id == operation.link.id for l in structure.links):
            raise ConflictError(f"duplicate link id {operation.link.id!r}")
        for end in (operation.link.source, operation.link.target):
            if not structure.has_component(end):
                raise NotFoundError(f"link {operation.link.id}: unknown component {end!r}")
        return replace(structure, links=structure.links + (operation.link,))
    if isinstance(operation, RemoveLink):
        structure.link(operation.link_id)
        return replace(structure, links=tuple(l for l in structure.links if l.id != operation.link_id))
    if isinstance(operation, Rename):
        comp = structure.component(operation.component_id)
        if not operation.new_name.strip():
            raise ValidationError(f"component {comp.id}: name must be nonempty")
        renamed = replace(comp, name=operation.new_name)
        return replace(
            structure,
            components=tuple(renamed if c.id == comp.id else c for c in structure.components),
        )
    raise ValidationError(f"unknown edit operation {operation!r}")


def parse_edit_operation(raw: Mapping[str, object]) -> EditOperation:
    """Decode the wire form used by the CLI and HTTP layers.

    ``{"op": "add_component", "component": {...}}`` and friends; unknown op
    names or missing fields raise :class:`ValidationError`.
    """
    op = raw.get("op")
    try:
        if op == "add_component":
            return AddComponent(component=_component_from_dict(raw["component"]))
        if op == "remove_component":
            return RemoveComponent(component_id=str(raw["component_id"]))
        if op == "add_link":
            return AddLink(link=_link_from_dict(raw["link"]))
        if op == "remove_link":
            return RemoveLink(link_id=str(raw["link_id"]))
        if op == "rename":
            return Rename(component_id=str(raw["component_id"]), new_name=str(raw["new_name"]))
    except KeyError as exc:
        raise ValidationError(f"edit operation {op!r}: missing field {exc.args[0]!r}") from exc
    raise ValidationError(f"unknown edit operation kind {op!r}")


# --- review rules -------------------------------------------------------

RULE_ML_PRESENT = "ml-controller-present"
RULE_ML_HAS_DATA_INPUT = "ml-controller-has-data-input"
RULE_ML_HAS_OUTPUT = "ml-controller-has-output"


def validate(structure: ControlStructure) -> list[Violation]:
    """Evaluate the review rules and return violations as data.

    An empty list means the structure is ready for downstream analysis:
    at least one ML controller exists, and every ML controller consumes at
    least one data flow and issues at least one control action or data flow.
    """
    violations: list[Violation] = []
    ml_controllers = structure.components_by_kind(ComponentKind.MLController)
    if not ml_controllers:
        violations.append(
            Violation(
                element=structure.device_name,
                rule=RULE_ML_PRESENT,
                message="structure has no MLController component",
            )
        )
    for comp in ml_controllers:
        incoming_data = [
            l for l in structure.links if l.target == comp.id and l.kind is LinkKind.DataFlow
        ]
        outgoing = [
            l
            for l in structure.links
            if l.source == comp.id and l.kind in (LinkKind.ControlAction, LinkKind.DataFlow)
        ]
        if not incoming_data:
            violations.append(
                Violation(
                    element=comp.id,
                    rule=RULE_ML_HAS_DATA_INPUT,
                    message=f"ML controller {comp.id} has no incoming data flow",
                )
            )
        if not outgoing:
            violations.append(
                Violation(
                    element=comp.id,
                    rule=RULE_ML_HAS_OUTPUT,
                    message=f"ML controller {comp.id} has no outgoing control action or data flow",
                )
            )
    violations.sort(key=lambda v: (v.rule, v.element))
    return violations


# --- path and loop search -----------------------------------------------


def shortest_link_path(
    structure: ControlStructure,
    source: str,
    targets: Iterable[str],
    kinds: frozenset[LinkKind] | set[LinkKind],
) -> tuple[str, ...] | None:
    """Shortest simple path (>=1 link) from ``source`` to any of ``targets``.

    Only links whose kind is in ``kinds`` are walked.  Among equally short
    paths the lexicographically smallest link-id sequence wins, which makes
    every consumer of this function deterministic.  Returns None when no
    target is reachable.
    """
    target_set = {t for t in targets if t != source}
    if not target_set:
        return None
    allowed = [l for l in structure.links if l.kind in kinds]
    # Distance to the nearest target, computed over reversed links.
    rev: dict[str, list[Link]] = {}
    for link in allowed:
        rev.setdefault(link.target, []).append(link)
    dist: dict[str, int] = {t: 0 for t in target_set}
    queue = deque(target_set)
    while queue:
        node = queue.popleft()
        for link in rev.get(node, ()):
            if link.source not in dist:
                dist[link.source] = dist[node] + 1
                queue.append(link.source)
    if source not in dist:
        return None
    forward: dict[str, list[Link]] = {}
    for link in allowed:
        forward.setdefault(link.source, []).append(link)
    for out in forward.values():
        out.sort(key=lambda l: l.id)
    # Greedy reconstruction: the smallest feasible link id at each hop yields
    # the lexicographically smallest shortest sequence (link ids are unique).
    path: list[str] = []
    node, remaining = source, dist[source]
    while remaining > 0:
        step = next(
            l for l in forward.get(node, ()) if dist.get(l.target, -1) == remaining - 1
        )
        path.append(step.id)
        node, remaining = step.target, remaining - 1
    return tuple(path)


ACTION_KINDS = frozenset({LinkKind.ControlAction, LinkKind.DataFlow})
FEEDBACK_KINDS = frozenset({LinkKind.Feedback, LinkKind.DataFlow})


def enumerate_control_loops(structure: ControlStructure) -> tuple[ControlLoop, ...]:
    """All (controller, controlled) pairs closed by forward and return paths.

    The forward path runs over control-action/data-flow links, the return
    path over feedback/data-flow links; both are shortest simple paths with
    the lexicographic link-id tie-break.  Pairs are emitted ordered by
    (controller id, controlled id).
    """
    loops: list[ControlLoop] = []
    ids = [c.id for c in structure.components]
    for controller in ids:
        for controlled in ids:
            if controller == controlled:
                continue
            action = shortest_link_path(structure, controller, [controlled], ACTION_KINDS)
            if action is None:
                continue
            feedback = shortest_link_path(structure, controlled, [controller], FEEDBACK_KINDS)
            if feedback is None:
                continue
            loops.append(
                ControlLoop(
                    controller=controller,
                    controlled=controlled,
                    action_path=action,
                    feedback_path=feedback,
                )
            )
    return tuple(loops)


# --- serialization ------------------------------------------------------


def component_to_dict(component: Component) -> dict[str, object]:
    return {
        "id": component.id,
        "name": component.name,
        "kind": component.kind.value,
        "notes": component.notes,
    }


def link_to_dict(link: Link) -> dict[str, object]:
    return {
        "id": link.id,
        "source": link.source,
        "target": link.target,
        "kind": link.kind.value,
        "channel": link.channel,
    }


def structure_to_dict(structure: ControlStructure) -> dict[str, object]:
    return {
        "schema_version": STRUCTURE_SCHEMA_VERSION,
        "device_name": structure.device_name,
        "metadata": dict(sorted(structure.metadata.items())),
        "components": [component_to_dict(c) for c in structure.components],
        "links": [link_to_dict(l) for l in structure.links],
    }


def _require(raw: Mapping[str, object], field_name: str, where: str) -> object:
    if field_name not in raw:
        raise ParseError(f"missing field {field_name!r}", context=where)
    return raw[field_name]


def _component_from_dict(raw: Mapping[str, object]) -> Component:
    where = f"component {raw.get('id', '?')}"
    try:
        return Component(
            id=str(_require(raw, "id", "component")),
            name=str(_require(raw, "name", where)),
            kind=ComponentKind(str(_require(raw, "kind", where))),
            notes=str(raw.get("notes", "")),
        )
    except ValueError as exc:
        raise ParseError(f"invalid component kind: {exc}", context=where) from exc


def _link_from_dict(raw: Mapping[str, object]) -> Link:
    where = f"link {raw.get('id', '?')}"
    channel = raw.get("channel")
    try:
        return Link(
            id=str(_require(raw, "id", "link")),
            source=str(_require(raw, "source", where)),
            target=str(_require(raw, "target", where)),
            kind=LinkKind(str(_require(raw, "kind", where))),
            channel=None if channel is None else str(channel),
        )
    except ValueError as exc:
        raise ParseError(f"invalid link kind: {exc}", context=where) from exc


def structure_from_dict(raw: Mapping[str, object]) -> ControlStructure:
    version = _require(raw, "schema_version", "document")
    if version != STRUCTURE_SCHEMA_VERSION:
        raise ParseError(
            f"unsupported schema_version {version!r} (supported: {STRUCTURE_SCHEMA_VERSION})",
            context="document",
        )
    components_raw = _require(raw, "components", "document")
    links_raw = _require(raw, "links", "document")
    if not isinstance(components_raw, list) or not isinstance(links_raw, list):
        raise ParseError("components and links must be arrays", context="document")
    try:
        return ControlStructure(
            device_name=str(_require(raw, "device_name", "document")),
            components=tuple(_component_from_dict(c) for c in components_raw),
            links=tuple(_link_from_dict(l) for l in links_raw),
            metadata={str(k): str(v) for k, v in dict(raw.get("metadata", {})).items()},
        )
    except (ConflictError, NotFoundError, ValidationError) as exc:
        raise ParseError(str(exc), context="document") from exc


def loss_to_dict(loss: Loss) -> dict[str, object]:
    return {"id": loss.id, "description": loss.description}


def loss_from_dict(raw: Mapping[str, object]) -> Loss:
    where = f"loss {raw.get('id', '?')}"
    try:
        return Loss(
            id=str(_require(raw, "id", "loss")),
            description=str(_require(raw, "description", where)),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), context=where) from exc


def hazard_to_dict(hazard: Hazard) -> dict[str, object]:
    return {
        "id": hazard.id,
        "description": hazard.description,
        "linked_losses": list(hazard.linked_losses),
    }


def hazard_from_dict(raw: Mapping[str, object]) -> Hazard:
    where = f"hazard {raw.get('id', '?')}"
    losses = _require(raw, "linked_losses", where)
    if not isinstance(losses, list):
        raise ParseError("linked_losses must be an array", context=where)
    try:
        return Hazard(
            id=str(_require(raw, "id", "hazard")),
            description=str(_require(raw, "description", where)),
            linked_losses=tuple(str(l) for l in losses),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), context=where) from exc


def uca_to_dict(uca: UnsafeControlAction) -> dict[str, object]:
    return {
        "id": uca.id,
        "control_action": uca.control_action,
        "guideword": uca.guideword.value,
        "hazards": list(uca.hazards),
        "description": uca.description,
    }


def uca_from_dict(raw: Mapping[str, object]) -> UnsafeControlAction:
    where = f"unsafe control action {raw.get('id', '?')}"
    hazards = _require(raw, "hazards", where)
    if not isinstance(hazards, list):
        raise ParseError("hazards must be an array", context=where)
    try:
        return UnsafeControlAction(
            id=str(_require(raw, "id", "unsafe control action")),
            control_action=str(_require(raw, "control_action", where)),
            guideword=UCAGuideword(str(_require(raw, "guideword", where))),
            hazards=tuple(str(h) for h in hazards),
            description=str(_require(raw, "description", where)),
        )
    except (ValueError, ValidationError) as exc:
        raise ParseError(str(exc), context=where) from exc


def serialize(structure: ControlStructure) -> str:
    """Canonical text form: sorted keys, two-space indent, trailing newline.

    Identical structures always produce byte-identical output.
    """
    return json.dumps(structure_to_dict(structure), indent=2, sort_keys=True) + "\n"


def deserialize(document: str) -> ControlStructure:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", context=f"line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(raw, dict):
        raise ParseError("document root must be an object", context="document")
    return structure_from_dict(raw)
