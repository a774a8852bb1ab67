"""Analytics over public device-release records.

Three record families are supported, each ingested from a saved snapshot
document: premarket listings of ML-enabled devices (CSV), recall records
(JSON), and adverse event reports (JSON).  On top of ingestion the module
offers fault-class and security-mention cue classification, name-based
cross-referencing between event reports and device listings, and grouped
count tables with fixed-point percentages.

Percentages are computed with decimal half-up rounding to one place so the
published tables are reproducible; float arithmetic never decides a digit.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from datetime import date
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError
from .textmatch import normalize_name, term_in_text


class FaultClass(str, Enum):
    Software = "Software"
    Hardware = "Hardware"
    Battery = "Battery"
    IO = "I/O"
    Labeling = "Labeling"
    Other = "Other"


class EventType(str, Enum):
    Malfunction = "Malfunction"
    Injury = "Injury"
    Death = "Death"
    Other = "Other"


class SecurityMention(str, Enum):
    """How a narrative addresses security, weakest to strongest."""

    NoMention = "None"
    MentionedUnspecified = "MentionedUnspecified"
    Proprietary = "Proprietary"
    RecognizedMethod = "RecognizedMethod"


_MENTION_RANK = {member: rank for rank, member in enumerate(SecurityMention)}


class GroupBy(str, Enum):
    EventType = "EventType"
    ProblemCode = "ProblemCode"
    Year = "Year"
    Panel = "Panel"


MISSING_PROBLEM_KEY = "N/A"
UNLINKED_KEY = "Unlinked"


@dataclass(frozen=True)
class MLDeviceRecord:
    submission_number: str
    device_name: str
    manufacturer: str
    panel: str
    decision_date: date
    ml_enabled: bool
    samd_or_simd: str | None = None


@dataclass(frozen=True)
class RecallRecord:
    recall_number: str
    device_name: str
    manufacturer: str
    recall_class: str
    quantity_in_commerce: int | None
    reason: str
    status: str
    event_date: date


@dataclass(frozen=True)
class MaudeEvent:
    report_number: str
    device_name: str
    manufacturer: str
    event_type: EventType
    date_received: date
    product_problems: tuple[str, ...] = ()
    narrative: str = ""


@dataclass(frozen=True)
class PanelTable:
    canonical: tuple[str, ...]
    aliases: Mapping[str, str]


def _data_json(filename: str) -> dict:
    text = (resources.files("meddevsec") / "data" / filename).read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def load_panels() -> PanelTable:
    raw = _data_json("panels.json")
    return PanelTable(canonical=tuple(raw["canonical"]), aliases=dict(raw["aliases"]))


@lru_cache(maxsize=1)
def load_acronyms() -> Mapping[str, str]:
    return dict(_data_json("acronyms.json")["expansions"])


def normalize_panel(raw: str, table: PanelTable | None = None) -> tuple[str, str | None]:
    """Map a free-form panel string to a canonical panel name.

    Returns (canonical, warning); the warning is None when the value was
    recognized and explains the fallback to "Other" when it was not.
    """
    table = table or load_panels()
    value = " ".join(raw.split())
    for canonical in table.canonical:
        if value.lower() == canonical.lower():
            return canonical, None
    alias = table.aliases.get(value.lower())
    if alias is not None:
        return alias, None
    return "Other", f"unrecognized panel {raw!r}; recorded as Other"


# --- device listing ingestion -------------------------------------------------

DEVICE_CSV_COLUMNS = (
    "submission_number",
    "device_name",
    "manufacturer",
    "panel",
    "decision_date",
    "ml_enabled",
    "samd_or_simd",
)

_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_devices_csv(text: str) -> tuple[list[MLDeviceRecord], list[str]]:
    """Parse the device-listing CSV; malformed rows are skipped with warnings."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ParseError("device listing is empty", context="header")
    if set(reader.fieldnames) != set(DEVICE_CSV_COLUMNS):
        raise ParseError(
            f"device listing header must have columns {', '.join(DEVICE_CSV_COLUMNS)}",
            context="header",
        )
    panels = load_panels()
    records: list[MLDeviceRecord] = []
    warnings: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        values = {k: (v or "").strip() for k, v in row.items() if k}
        label = values.get("submission_number") or f"row at line {line_no}"
        try:
            for field in ("submission_number", "device_name", "manufacturer", "panel"):
                if not values.get(field):
                    raise ValueError(f"missing {field}")
            decision_date = date.fromisoformat(values["decision_date"])
            flag = _BOOL_VALUES.get(values["ml_enabled"].lower())
            if flag is None:
                raise ValueError(f"bad ml_enabled value {values['ml_enabled']!r}")
            samd = values.get("samd_or_simd", "")
            kind = {"samd": "SaMD", "simd": "SiMD"}.get(samd.lower()) if samd else None
            if samd and kind is None:
                warnings.append(f"{label}: unrecognized samd_or_simd value {samd!r}")
            panel, panel_warning = normalize_panel(values["panel"], panels)
            if panel_warning:
                warnings.append(f"{label}: {panel_warning}")
            records.append(
                MLDeviceRecord(
                    submission_number=values["submission_number"],
                    device_name=values["device_name"],
                    manufacturer=values["manufacturer"],
                    panel=panel,
                    decision_date=decision_date,
                    ml_enabled=flag,
                    samd_or_simd=kind,
                )
            )
        except ValueError as exc:
            warnings.append(f"skipped {label}: {exc}")
    return records, warnings


# --- recall ingestion ---------------------------------------------------------

_RECALL_CLASSES = ("I", "II", "III")


def parse_recalls(document: str) -> tuple[list[RecallRecord], list[str]]:
    raw = _load_snapshot(document, "fda_recalls")
    records: list[RecallRecord] = []
    warnings: list[str] = []
    for pos, row in enumerate(raw["records"]):
        label = f"record {pos}"
        try:
            if not isinstance(row, dict):
                raise ValueError("not an object")
            number = str(row.get("recall_number", "")).strip()
            if not number:
                raise ValueError("missing recall_number")
            label = number
            recall_class = str(row.get("recall_class", "")).strip().upper()
            if recall_class not in _RECALL_CLASSES:
                raise ValueError(f"bad recall_class {row.get('recall_class')!r}")
            quantity = row.get("quantity_in_commerce")
            if quantity is not None:
                quantity = int(quantity)
                if quantity < 0:
                    raise ValueError(f"negative quantity {quantity}")
            records.append(
                RecallRecord(
                    recall_number=number,
                    device_name=str(row.get("device_name", "")).strip(),
                    manufacturer=str(row.get("manufacturer", "")).strip(),
                    recall_class=recall_class,
                    quantity_in_commerce=quantity,
                    reason=str(row.get("reason", "")).strip(),
                    status=str(row.get("status", "")).strip(),
                    event_date=date.fromisoformat(str(row.get("event_date"))),
                )
            )
        except (TypeError, ValueError) as exc:
            warnings.append(f"skipped {label}: {exc}")
    return records, warnings


# --- adverse event ingestion --------------------------------------------------


def parse_maude(document: str) -> tuple[list[MaudeEvent], list[str]]:
    raw = _load_snapshot(document, "fda_maude")
    events: list[MaudeEvent] = []
    warnings: list[str] = []
    for pos, row in enumerate(raw["records"]):
        label = f"record {pos}"
        try:
            if not isinstance(row, dict):
                raise ValueError("not an object")
            number = str(row.get("report_number", "")).strip()
            if not number:
                raise ValueError("missing report_number")
            label = number
            type_raw = str(row.get("event_type", "")).strip()
            try:
                event_type = EventType(type_raw)
            except ValueError:
                raise ValueError(f"bad event_type {type_raw!r}") from None
            problems = row.get("product_problems") or []
            if not isinstance(problems, list):
                raise ValueError("product_problems must be a list")
            events.append(
                MaudeEvent(
                    report_number=number,
                    device_name=str(row.get("device_name", "")).strip(),
                    manufacturer=str(row.get("manufacturer", "")).strip(),
                    event_type=event_type,
                    date_received=date.fromisoformat(str(row.get("date_received"))),
                    product_problems=tuple(str(p).strip() for p in problems if str(p).strip()),
                    narrative=str(row.get("narrative", "")),
                )
            )
        except (TypeError, ValueError) as exc:
            warnings.append(f"skipped {label}: {exc}")
    return events, warnings


def _load_snapshot(document: str, dataset: str) -> dict:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", context=f"line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(raw, dict) or raw.get("dataset") != dataset:
        raise ParseError(f"document is not a {dataset!r} snapshot", context="document")
    if not isinstance(raw.get("records"), list):
        raise ParseError("snapshot must carry a 'records' array", context="document")
    return raw


# --- cue classification --------------------------------------------------------


@lru_cache(maxsize=1)
def _fault_cues() -> tuple[tuple[FaultClass, tuple[str, ...]], ...]:
    raw = _data_json("recall_fault_cues.json")
    return tuple(
        (FaultClass(entry["fault_class"]), tuple(entry["cues"])) for entry in raw["classes"]
    )


def classify_fault_class(reason: str) -> FaultClass:
    """First fault class whose cue list hits the recall reason; Other if none."""
    for fault_class, cues in _fault_cues():
        if any(term_in_text(cue, reason) for cue in cues):
            return fault_class
    return FaultClass.Other


@lru_cache(maxsize=1)
def _mention_cues() -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    raw = _data_json("security_mention_cues.json")
    return (
        tuple(raw["recognized_methods"]),
        tuple(raw["proprietary_markers"]),
        tuple(raw["mention_terms"]),
    )


def classify_security_mention(text: str) -> SecurityMention:
    """Strength of the security discussion in a narrative.

    A named analysis method always wins; otherwise a generic security mention
    is graded up to Proprietary when the text credits an unpublished in-house
    approach.
    """
    recognized, proprietary, mentions = _mention_cues()
    if any(term_in_text(cue, text) for cue in recognized):
        return SecurityMention.RecognizedMethod
    if any(term_in_text(cue, text) for cue in mentions):
        if any(term_in_text(cue, text) for cue in proprietary):
            return SecurityMention.Proprietary
        return SecurityMention.MentionedUnspecified
    return SecurityMention.NoMention


def merge_security_mentions(mentions: Iterable[SecurityMention]) -> SecurityMention:
    """Combine per-excerpt grades; the strongest evidence wins."""
    merged = SecurityMention.NoMention
    for mention in mentions:
        if _MENTION_RANK[mention] > _MENTION_RANK[merged]:
            merged = mention
    return merged


# --- cross referencing ----------------------------------------------------------


@dataclass(frozen=True)
class RecordLink:
    record_key: str
    submission_number: str


@dataclass(frozen=True)
class Linkage:
    links: tuple[RecordLink, ...]
    unlinked: tuple[str, ...]

    def submission_for(self, record_key: str) -> str | None:
        for link in self.links:
            if link.record_key == record_key:
                return link.submission_number
        return None


def _prefix_strength(a: str, b: str) -> int | None:
    """Length of the common prefix when it covers >=90% of the shorter name."""
    if not a or not b:
        return None
    limit = min(len(a), len(b))
    prefix = 0
    while prefix < limit and a[prefix] == b[prefix]:
        prefix += 1
    if prefix >= 0.9 * limit:
        return prefix
    return None


def _link_rows(
    rows: Sequence[tuple[str, str, str]], devices: Sequence[MLDeviceRecord]
) -> Linkage:
    acronyms = load_acronyms()
    prepared = [
        (
            device,
            normalize_name(device.device_name, acronyms),
            normalize_name(device.manufacturer),
        )
        for device in devices
    ]
    links: list[RecordLink] = []
    unlinked: list[str] = []
    for key, name, manufacturer in rows:
        norm_name = normalize_name(name, acronyms)
        norm_manufacturer = normalize_name(manufacturer)
        candidates: list[tuple[int, str]] = []
        for device, device_name, device_manufacturer in prepared:
            strength = _prefix_strength(norm_name, device_name)
            if strength is None:
                continue
            if norm_manufacturer and _prefix_strength(norm_manufacturer, device_manufacturer) is None:
                continue
            candidates.append((strength, device.submission_number))
        if candidates:
            candidates.sort(key=lambda c: (-c[0], c[1]))
            links.append(RecordLink(record_key=key, submission_number=candidates[0][1]))
        else:
            unlinked.append(key)
    return Linkage(links=tuple(links), unlinked=tuple(unlinked))


def cross_reference(
    events: Sequence[MaudeEvent], devices: Sequence[MLDeviceRecord]
) -> Linkage:
    """Link each event report to at most one device listing by name.

    Names are normalized (case, punctuation, acronym expansion) and match when
    equal or when their common prefix covers at least 90% of the shorter name.
    An event with no recorded manufacturer can link on device name alone.
    """
    rows = [(e.report_number, e.device_name, e.manufacturer) for e in events]
    return _link_rows(rows, devices)


def cross_reference_recalls(
    recalls: Sequence[RecallRecord], devices: Sequence[MLDeviceRecord]
) -> Linkage:
    rows = [(r.recall_number, r.device_name, r.manufacturer) for r in recalls]
    return _link_rows(rows, devices)


# --- aggregation ------------------------------------------------------------------


@dataclass(frozen=True)
class CountRow:
    key: str
    count: int
    percent: float


@dataclass(frozen=True)
class CountTable:
    group_by: GroupBy
    total: int
    rows: tuple[CountRow, ...]

    def row(self, key: str) -> CountRow | None:
        for row in self.rows:
            if row.key == key:
                return row
        return None


def round_percent(count: int, total: int) -> float:
    """count/total as a percentage with one decimal, half up."""
    if total <= 0:
        return 0.0
    ratio = Decimal(count * 100) / Decimal(total)
    return float(ratio.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def aggregate(
    events: Sequence[MaudeEvent],
    group_by: GroupBy,
    devices: Sequence[MLDeviceRecord] | None = None,
) -> CountTable:
    """Count events per group key; percentages are shares of all events.

    Rows sort by descending count with alphabetical keys breaking ties.  For
    ``GroupBy.Panel`` the events are first cross-referenced against the device
    listing and events that link to nothing are counted under "Unlinked".
    """
    group_by = GroupBy(group_by)
    counter: Counter[str] = Counter()
    if group_by is GroupBy.Panel:
        if devices is None:
            raise ValidationError("panel aggregation requires the device listing")
        linkage = cross_reference(events, devices)
        by_submission = {d.submission_number: d for d in devices}
        linked = {link.record_key: link.submission_number for link in linkage.links}
        for event in events:
            submission = linked.get(event.report_number)
            if submission is None:
                counter[UNLINKED_KEY] += 1
            else:
                counter[by_submission[submission].panel] += 1
    else:
        for event in events:
            counter.update(_group_keys(event, group_by))
    total = len(events)
    rows = tuple(
        CountRow(key=key, count=count, percent=round_percent(count, total))
        for key, count in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return CountTable(group_by=group_by, total=total, rows=rows)


def _group_keys(event: MaudeEvent, group_by: GroupBy) -> list[str]:
    if group_by is GroupBy.EventType:
        return [event.event_type.value]
    if group_by is GroupBy.Year:
        return [str(event.date_received.year)]
    if group_by is GroupBy.ProblemCode:
        if not event.product_problems:
            return [MISSING_PROBLEM_KEY]
        keys: list[str] = []
        for problem in event.product_problems:
            if problem not in keys:
                keys.append(problem)
        return keys
    raise ValidationError(f"unsupported grouping {group_by!r}")


def tally_fault_classes(recalls: Sequence[RecallRecord]) -> CountTable:
    """Recall counts by classified fault class, shaped like aggregate() output."""
    counter = Counter(classify_fault_class(r.reason).value for r in recalls)
    total = len(recalls)
    rows = tuple(
        CountRow(key=key, count=count, percent=round_percent(count, total))
        for key, count in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return CountTable(group_by=GroupBy.ProblemCode, total=total, rows=rows)


# --- persistence -------------------------------------------------------------------


def device_to_dict(record: MLDeviceRecord) -> dict[str, object]:
    return {
        "submission_number": record.submission_number,
        "device_name": record.device_name,
        "manufacturer": record.manufacturer,
        "panel": record.panel,
        "decision_date": record.decision_date.isoformat(),
        "ml_enabled": record.ml_enabled,
        "samd_or_simd": record.samd_or_simd,
    }


def device_from_dict(raw: Mapping[str, object]) -> MLDeviceRecord:
    return MLDeviceRecord(
        submission_number=str(raw["submission_number"]),
        device_name=str(raw["device_name"]),
        manufacturer=str(raw["manufacturer"]),
        panel=str(raw["panel"]),
        decision_date=date.fromisoformat(str(raw["decision_date"])),
        ml_enabled=bool(raw["ml_enabled"]),
        samd_or_simd=None if raw.get("samd_or_simd") is None else str(raw["samd_or_simd"]),
    )


def recall_to_dict(record: RecallRecord) -> dict[str, object]:
    return {
        "recall_number": record.recall_number,
        "device_name": record.device_name,
        "manufacturer": record.manufacturer,
        "recall_class": record.recall_class,
        "quantity_in_commerce": record.quantity_in_commerce,
        "reason": record.reason,
        "status": record.status,
        "event_date": record.event_date.isoformat(),
    }


def recall_from_dict(raw: Mapping[str, object]) -> RecallRecord:
    quantity = raw.get("quantity_in_commerce")
    return RecallRecord(
        recall_number=str(raw["recall_number"]),
        device_name=str(raw["device_name"]),
        manufacturer=str(raw["manufacturer"]),
        recall_class=str(raw["recall_class"]),
        quantity_in_commerce=None if quantity is None else int(quantity),
        reason=str(raw["reason"]),
        status=str(raw["status"]),
        event_date=date.fromisoformat(str(raw["event_date"])),
    )


def event_to_dict(event: MaudeEvent) -> dict[str, object]:
    return {
        "report_number": event.report_number,
        "device_name": event.device_name,
        "manufacturer": event.manufacturer,
        "event_type": event.event_type.value,
        "date_received": event.date_received.isoformat(),
        "product_problems": list(event.product_problems),
        "narrative": event.narrative,
    }


def event_from_dict(raw: Mapping[str, object]) -> MaudeEvent:
    return MaudeEvent(
        report_number=str(raw["report_number"]),
        device_name=str(raw["device_name"]),
        manufacturer=str(raw.get("manufacturer", "")),
        event_type=EventType(str(raw["event_type"])),
        date_received=date.fromisoformat(str(raw["date_received"])),
        product_problems=tuple(str(p) for p in raw.get("product_problems", [])),
        narrative=str(raw.get("narrative", "")),
    )


def count_table_to_dict(table: CountTable) -> dict[str, object]:
    return {
        "group_by": table.group_by.value,
        "total": table.total,
        "rows": [
            {"key": row.key, "count": row.count, "percent": row.percent} for row in table.rows
        ],
    }
