"""Vulnerability intelligence: CVE/ICS-CERT ingestion, filtering, search.

Records come from saved snapshot documents, never from live crawling: a CVE
feed subset as JSON and ICS-CERT advisories as a sectioned text export (the
exact grammars live under ``meddevsec/schemas``).  Ingested records are
filtered for medical relevance with a shipped keyword set, held in an
in-memory index deduplicated by (source, id), and served through a ranked
keyword search whose scoring formula is deliberately simple enough to audit
by hand:

    score = distinct query terms matched + 0.5 if a public exploit is known
            + severity / 100 when a severity is recorded

Missing severity contributes nothing; it is never imputed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

from .errors import ParseError, ValidationError
from .textmatch import content_tokens, normalize_term, term_in_text


class Source(str, Enum):
    CVE = "CVE"
    ICSCERT = "ICSCERT"


class Exploitability(str, Enum):
    Local = "Local"
    Remote = "Remote"
    Unknown = "Unknown"


@dataclass(frozen=True)
class VulnerabilityRecord:
    id: str
    source: Source
    summary: str
    affected_terms: tuple[str, ...]
    severity: float | None
    exploitability: Exploitability
    public_exploit: bool
    published: date
    attack_vector: str | None = None
    related_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ValidationError("vulnerability id must be nonempty")
        if self.severity is not None and not 0 <= self.severity <= 10:
            raise ValidationError(f"{self.id}: severity {self.severity} outside [0,10]")


@dataclass(frozen=True)
class MedicalKeywordSet:
    generic_terms: tuple[str, ...]
    device_category_terms: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (self.generic_terms or self.device_category_terms):
            raise ValidationError("medical keyword set must not be empty")

    def all_terms(self) -> tuple[str, ...]:
        return self.generic_terms + self.device_category_terms


@dataclass(frozen=True)
class MatchResult:
    record: VulnerabilityRecord
    score: float
    matched_terms: tuple[str, ...]


def _data_json(filename: str) -> dict:
    text = (resources.files("meddevsec") / "data" / filename).read_text(encoding="utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def load_medical_keywords() -> MedicalKeywordSet:
    raw = _data_json("medical_keywords.json")
    return MedicalKeywordSet(
        generic_terms=tuple(raw["generic_terms"]),
        device_category_terms=tuple(raw["device_category_terms"]),
    )


@lru_cache(maxsize=1)
def _exploitability_cues() -> tuple[tuple[str, ...], tuple[str, ...]]:
    raw = _data_json("exploitability_cues.json")
    return tuple(raw["remote"]), tuple(raw["local"])


def _classify(vector: str | None, summary: str) -> Exploitability:
    remote_cues, local_cues = _exploitability_cues()
    haystack = f"{vector or ''} {summary}"
    if any(term_in_text(cue, haystack) for cue in remote_cues):
        return Exploitability.Remote
    if any(term_in_text(cue, haystack) for cue in local_cues):
        return Exploitability.Local
    return Exploitability.Unknown


def classify_exploitability(record: VulnerabilityRecord) -> Exploitability:
    """Cue-table classification over vector metadata and summary.

    Remote cues are checked first and win on conflict (a summary describing
    an attacker "on the local network" is remote, not local).
    """
    return _classify(record.attack_vector, record.summary)


# --- CVE feed ingestion ---------------------------------------------------


def _affected_terms(products: list[str], summary: str) -> tuple[str, ...]:
    terms: list[str] = []
    for raw in products:
        norm = normalize_term(raw)
        if norm and norm not in terms:
            terms.append(norm)
    for tok in content_tokens(summary):
        if tok not in terms:
            terms.append(tok)
    return tuple(terms)


def _parse_date(raw: object) -> date:
    try:
        return date.fromisoformat(str(raw))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad published date {raw!r}") from exc


def ingest_cve_feed(document: str) -> tuple[list[VulnerabilityRecord], list[str]]:
    """Parse a CVE feed snapshot; skip bad entries, never the whole feed.

    Returns (records, warnings); one warning per skipped entry naming both
    the entry and the reason.  A document that is not a feed at all raises
    :class:`ParseError`.
    """
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", context=f"line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        raise ParseError("CVE feed must be an object with an 'entries' array", context="document")
    records: list[VulnerabilityRecord] = []
    warnings: list[str] = []
    for pos, entry in enumerate(raw["entries"]):
        label = f"entry {pos}"
        try:
            if not isinstance(entry, dict):
                raise ValueError("not an object")
            cve_id = str(entry.get("id", "")).strip()
            if not cve_id:
                raise ValueError("missing id")
            label = cve_id
            descriptions = entry.get("descriptions")
            summary = ""
            if isinstance(descriptions, list):
                for desc in descriptions:
                    if isinstance(desc, dict) and desc.get("value"):
                        summary = str(desc["value"])
                        if desc.get("lang", "en") == "en":
                            break
            if not summary:
                raise ValueError("no usable description")
            metrics = entry.get("metrics") or {}
            severity = metrics.get("base_score")
            if severity is not None:
                severity = float(severity)
                if not 0 <= severity <= 10:
                    raise ValueError(f"base_score {severity} outside [0,10]")
            vector = metrics.get("attack_vector")
            vector = str(vector) if vector is not None else None
            products: list[str] = []
            for item in entry.get("affected", []):
                if isinstance(item, dict):
                    for key in ("vendor", "product"):
                        value = str(item.get(key, "")).strip()
                        if value:
                            products.append(value)
            published = _parse_date(entry.get("published"))
            record = VulnerabilityRecord(
                id=cve_id,
                source=Source.CVE,
                summary=summary,
                affected_terms=_affected_terms(products, summary),
                severity=severity,
                exploitability=_classify(vector, summary),
                public_exploit=bool(entry.get("public_exploit", False)),
                published=published,
                attack_vector=vector,
            )
            records.append(record)
        except (ValueError, ValidationError) as exc:
            warnings.append(f"skipped {label}: {exc}")
    return records, warnings


# --- ICS-CERT snapshot ingestion ------------------------------------------

_ADVISORY_FIELDS = ("Title", "Published", "Products", "Vendors", "CVE References")
_OPTIONAL_FIELDS = ("CVSS", "Public Exploit")
_HEADER_RE = re.compile(r"^([A-Za-z][A-Za-z /-]*):\s*(.*)$")


def ingest_icscert(document: str) -> tuple[list[VulnerabilityRecord], list[str]]:
    """Parse an ICS-CERT advisory export (sectioned plain text).

    Every advisory block starts at an ``Advisory:`` line and must carry the
    Title, Published, Products, Vendors, CVE References, and Description
    sections; CVSS and Public Exploit are optional.  A missing section is a
    parse error naming the advisory and the first section not found.
    """
    lines = document.splitlines()
    starts = [i for i, line in enumerate(lines) if line.startswith("Advisory:")]
    if not starts:
        raise ParseError("no 'Advisory:' section found", context="line 1")
    records: list[VulnerabilityRecord] = []
    warnings: list[str] = []
    for block_no, start in enumerate(starts):
        end = starts[block_no + 1] if block_no + 1 < len(starts) else len(lines)
        advisory_id = lines[start].split(":", 1)[1].strip()
        where = f"advisory {advisory_id or start + 1}"
        fields: dict[str, str] = {}
        desc_lines: list[str] = []
        in_description = False
        for offset in range(start + 1, end):
            line = lines[offset]
            if in_description:
                desc_lines.append(line)
                continue
            if not line.strip():
                continue
            match = _HEADER_RE.match(line)
            if not match:
                raise ParseError(
                    f"{where}: unrecognized section layout", context=f"line {offset + 1}"
                )
            key, value = match.group(1).strip(), match.group(2).strip()
            if key == "Description":
                in_description = True
                if value:
                    desc_lines.append(value)
                continue
            fields[key] = value
        for required in _ADVISORY_FIELDS:
            if required not in fields:
                raise ParseError(f"{where}: missing section {required!r}", context=where)
        if not desc_lines:
            raise ParseError(f"{where}: missing section 'Description'", context=where)
        if not advisory_id:
            warnings.append(f"skipped advisory at line {start + 1}: empty advisory id")
            continue
        try:
            published = _parse_date(fields["Published"])
            severity = float(fields["CVSS"]) if fields.get("CVSS") else None
            products = [p.strip() for p in fields["Products"].split(";") if p.strip()]
            vendors = [v.strip() for v in fields["Vendors"].split(";") if v.strip()]
            refs = tuple(
                r.strip()
                for r in fields["CVE References"].replace(";", ",").split(",")
                if r.strip() and r.strip().lower() != "none"
            )
            summary = " ".join(l.strip() for l in desc_lines if l.strip())
            exploit = fields.get("Public Exploit", "").strip().lower() in ("yes", "true")
            record = VulnerabilityRecord(
                id=advisory_id,
                source=Source.ICSCERT,
                summary=summary,
                affected_terms=_affected_terms(products + vendors, summary),
                severity=severity,
                exploitability=_classify(None, summary),
                public_exploit=exploit,
                published=published,
                related_ids=refs,
            )
            records.append(record)
        except (ValueError, ValidationError) as exc:
            warnings.append(f"skipped {where}: {exc}")
    return records, warnings


def read_snapshot_date(document: str) -> str | None:
    """Snapshot date declared by a feed document, if any.

    Works for both supported formats: the JSON feed's ``snapshot_date`` field
    and the advisory export's ``Snapshot-Date:`` header line.
    """
    stripped = document.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError:
            return None
        value = raw.get("snapshot_date") if isinstance(raw, dict) else None
        return str(value) if value else None
    for line in document.splitlines():
        if line.startswith("Snapshot-Date:"):
            return line.split(":", 1)[1].strip() or None
        if line.startswith("Advisory:"):
            break
    return None


# --- filtering and search --------------------------------------------------


def _keyword_hits_record(keyword: str, record: VulnerabilityRecord) -> bool:
    if term_in_text(keyword, record.summary):
        return True
    return any(term_in_text(keyword, term) for term in record.affected_terms)


def filter_medical(
    records: Iterable[VulnerabilityRecord], keywords: MedicalKeywordSet
) -> list[VulnerabilityRecord]:
    """Records whose summary or affected terms hit any medical keyword.

    Input order is preserved; the operation is idempotent.
    """
    terms = keywords.all_terms()
    return [r for r in records if any(_keyword_hits_record(t, r) for t in terms)]


class VulnerabilityIndex:
    """Read-mostly record store deduplicated by (source, id).

    Build it by calling :meth:`add` for each ingested batch, then treat it as
    read-only; searches share it safely.
    """

    def __init__(self, records: Iterable[VulnerabilityRecord] = ()) -> None:
        self._records: dict[tuple[Source, str], VulnerabilityRecord] = {}
        self.add(records)

    def add(self, records: Iterable[VulnerabilityRecord]) -> int:
        """Insert new records; re-adding an existing (source, id) is a no-op."""
        added = 0
        for record in records:
            key = (record.source, record.id)
            if key not in self._records:
                self._records[key] = record
                added += 1
        return added

    def records(self) -> tuple[VulnerabilityRecord, ...]:
        return tuple(self._records[key] for key in sorted(self._records, key=lambda k: (k[0].value, k[1])))

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key: tuple[Source, str]) -> bool:
        return key in self._records

    def get(self, source: Source, record_id: str) -> VulnerabilityRecord | None:
        return self._records.get((source, record_id))

    def find(self, record_id: str) -> VulnerabilityRecord | None:
        """Lookup by bare id across sources (ids rarely collide in practice)."""
        for source in Source:
            record = self._records.get((source, record_id))
            if record is not None:
                return record
        return None

    def search(self, query: list[str] | tuple[str, ...]) -> list[MatchResult]:
        return search(query, self)


def search(query: list[str] | tuple[str, ...], index: VulnerabilityIndex) -> list[MatchResult]:
    """Ranked keyword retrieval over the index.

    Distinct matched query terms drive the score; a known public exploit adds
    0.5 and recorded severity adds severity/100.  Results sort by score
    descending with ties broken by id ascending, and a record with no matched
    term never appears however severe it is.
    """
    terms = []
    for term in query:
        norm = normalize_term(term)
        if norm and norm not in terms:
            terms.append(norm)
    if not terms:
        raise ValidationError("search query must contain at least one nonempty term")
    results: list[MatchResult] = []
    for record in index.records():
        matched = tuple(t for t in terms if _keyword_hits_record(t, record))
        if not matched:
            continue
        score = float(len(matched))
        if record.public_exploit:
            score += 0.5
        if record.severity is not None:
            score += record.severity / 100
        results.append(MatchResult(record=record, score=score, matched_terms=matched))
    results.sort(key=lambda m: (-m.score, m.record.id))
    return results


# --- optional online fetch --------------------------------------------------


class SnapshotFetcher:
    """Minimal network client interface for the optional online mode.

    The default build never touches the network; callers wire in an
    implementation (e.g. httpx-based) only when asked for online mode.
    """

    def fetch(self, url: str) -> str:  # pragma: no cover - interface only
        raise NotImplementedError


def ingest_cve_feed_url(
    fetcher: SnapshotFetcher, url: str
) -> tuple[list[VulnerabilityRecord], list[str]]:
    return ingest_cve_feed(fetcher.fetch(url))


# --- persistence -------------------------------------------------------------


def record_to_dict(record: VulnerabilityRecord) -> dict[str, object]:
    return {
        "id": record.id,
        "source": record.source.value,
        "summary": record.summary,
        "affected_terms": list(record.affected_terms),
        "severity": record.severity,
        "exploitability": record.exploitability.value,
        "public_exploit": record.public_exploit,
        "published": record.published.isoformat(),
        "attack_vector": record.attack_vector,
        "related_ids": list(record.related_ids),
    }


def record_from_dict(raw: Mapping[str, object]) -> VulnerabilityRecord:
    return VulnerabilityRecord(
        id=str(raw["id"]),
        source=Source(str(raw["source"])),
        summary=str(raw["summary"]),
        affected_terms=tuple(str(t) for t in raw.get("affected_terms", [])),
        severity=None if raw.get("severity") is None else float(raw["severity"]),
        exploitability=Exploitability(str(raw["exploitability"])),
        public_exploit=bool(raw.get("public_exploit", False)),
        published=date.fromisoformat(str(raw["published"])),
        attack_vector=None if raw.get("attack_vector") is None else str(raw["attack_vector"]),
        related_ids=tuple(str(r) for r in raw.get("related_ids", [])),
    )
