"""Regenerate the large committed fixtures.

Everything here is deterministic (fixed seeds, no clock reads), so the
committed files can always be reproduced byte for byte:

    python tests/fixtures/generate_fixtures.py

The small fixtures are hand-written and intentionally not generated.
"""

from __future__ import annotations

import json
import random
from datetime import date, timedelta
from pathlib import Path

HERE = Path(__file__).resolve().parent


# --- CVE feed with a fixed number of malformed entries ----------------------

FEED_PRODUCTS = [
    ("Meditron", "infusion pump"),
    ("Netgrid", "network switch"),
    ("CarePulse", "patient monitor"),
    ("Webstack", "web server"),
    ("GlucoSense", "glucose meter"),
    ("Datakeep", "database engine"),
    ("VitaScan", "ultrasound console"),
    ("Mailflow", "mail gateway"),
    ("Cardiacom", "pacemaker programmer"),
    ("Plantlink", "industrial gateway"),
]
FEED_FLAWS = [
    "buffer overflow",
    "authentication bypass",
    "path traversal",
    "use after free",
    "command injection",
    "improper certificate validation",
]
FEED_SEVERITIES = [9.8, 7.5, None, 5.3, 8.8, 6.1, None, 4.3]
FEED_VECTORS = ["NETWORK", "LOCAL", None, "ADJACENT_NETWORK"]

MISSING_ID_AT = 12
BAD_SEVERITY_AT = 27
BAD_DATE_AT = 41


def build_cve_feed_50() -> str:
    entries = []
    for i in range(50):
        vendor, product = FEED_PRODUCTS[i % len(FEED_PRODUCTS)]
        flaw = FEED_FLAWS[i % len(FEED_FLAWS)]
        severity = FEED_SEVERITIES[i % len(FEED_SEVERITIES)]
        vector = FEED_VECTORS[i % len(FEED_VECTORS)]
        summary = (
            f"A {flaw} in the {product} management service allows an attacker "
            f"to alter device behavior without authorization."
        )
        metrics: dict = {}
        if severity is not None:
            metrics["base_score"] = severity
        if vector is not None:
            metrics["attack_vector"] = vector
        entry = {
            "id": f"CVE-2021-{10000 + i}",
            "descriptions": [{"lang": "en", "value": summary}],
            "metrics": metrics,
            "affected": [{"vendor": vendor, "product": product}],
            "published": (date(2021, 1, 1) + timedelta(days=i)).isoformat(),
            "public_exploit": i % 7 == 3,
        }
        if i == MISSING_ID_AT:
            del entry["id"]
        elif i == BAD_SEVERITY_AT:
            entry["metrics"] = dict(metrics, base_score=12.5)
        elif i == BAD_DATE_AT:
            entry["published"] = "not-a-date"
        entries.append(entry)
    document = {"dataset": "cve_feed", "snapshot_date": "2021-06-30", "entries": entries}
    return json.dumps(document, indent=2) + "\n"


# --- ICS medical advisory export --------------------------------------------

ADVISORY_DEVICES = [
    ("Infusion Pump", "infusion pump"),
    ("Insulin Pump", "insulin pump"),
    ("Patient Monitor", "patient monitor"),
    ("Glucose Meter", "glucose meter"),
    ("Pacemaker Programmer", "pacemaker"),
    ("Defibrillator", "defibrillator"),
    ("Ventilator", "ventilator"),
    ("Ultrasound Console", "ultrasound"),
    ("Dialysis Machine", "dialysis"),
    ("MRI Scanner", "mri"),
]
ADVISORY_VENDORS = [
    "Meditron",
    "CarePulse",
    "VitaScan",
    "GlucoSense",
    "Cardiacom",
    "PulmoTech",
    "RenalWorks",
    "ImagixHealth",
]
ADVISORY_FLAWS = [
    "hardcoded credentials in the maintenance interface",
    "a buffer overflow in the network communications module",
    "cleartext transmission of configuration commands",
    "missing authentication on the telemetry service",
    "an unrestricted firmware upload endpoint",
    "improper session handling in the web console",
    "a replay weakness in the wireless pairing protocol",
]
ADVISORY_CVSS = [7.5, 8.1, 6.5, 9.0, 5.4]

PUBLIC_EXPLOIT_EVERY = 8
PUBLIC_EXPLOIT_OFFSET = 3


def build_icscert_140() -> str:
    blocks = ["Snapshot-Date: 2018-12-31", ""]
    index = 0
    for year in range(1999, 2019):
        for slot in range(7):
            device_name, _ = ADVISORY_DEVICES[index % len(ADVISORY_DEVICES)]
            vendor = ADVISORY_VENDORS[index % len(ADVISORY_VENDORS)]
            flaw = ADVISORY_FLAWS[index % len(ADVISORY_FLAWS)]
            advisory_id = f"ICSMA-{year % 100:02d}-{100 + index:03d}-01"
            published = date(year, (index % 12) + 1, (index % 27) + 1)
            exploit = index % PUBLIC_EXPLOIT_EVERY == PUBLIC_EXPLOIT_OFFSET
            lines = [
                f"Advisory: {advisory_id}",
                f"Title: {vendor} {device_name} Vulnerability",
                f"Published: {published.isoformat()}",
                f"Products: {vendor} {device_name}",
                f"Vendors: {vendor}",
            ]
            if index % 3 == 0:
                refs = f"CVE-{year}-{2000 + index}, CVE-{year}-{3000 + index}"
            elif index % 3 == 1:
                refs = f"CVE-{year}-{2000 + index}"
            else:
                refs = ""
            lines.append(f"CVE References: {refs}".rstrip())
            if index % 2 == 0:
                lines.append(f"CVSS: {ADVISORY_CVSS[index % len(ADVISORY_CVSS)]}")
            lines.append(f"Public Exploit: {'yes' if exploit else 'no'}")
            lines.append(
                f"Description: The {device_name.lower()} contains {flaw}. An attacker "
                f"who reaches the device over the hospital network can change its "
                f"behavior and affect patient treatment."
            )
            blocks.append("\n".join(lines))
            blocks.append("")
            index += 1
    return "\n".join(blocks).rstrip("\n") + "\n"


# --- adverse event corpus ----------------------------------------------------

EVENT_TYPE_COUNTS = [("Malfunction", 1344), ("Injury", 114), ("Death", 1), ("Other", 1)]

# (problem code, count); None stands for a report with no coded problem.
PROBLEM_COUNTS: list[tuple[str | None, int]] = [
    ("Poor Quality Image", 421),
    (None, 295),
    ("False Negative Result", 103),
    ("High Readings", 73),
    ("Battery Problem", 66),
    ("Connection Problem", 64),
    ("Failure to Read Input Signal", 60),
    ("Display or Visual Feedback Problem", 58),
    ("Device Operates Differently Than Expected", 57),
    ("No Apparent Adverse Event", 56),
    ("Use of Device Problem", 55),
    ("Incorrect Inadequate or Imprecise Result or Readings", 45),
    ("Computer Software Problem", 42),
    ("Inaccurate Information", 25),
    ("Application Program Problem: Parameter Calculation Error", 17),
    ("Low Readings", 7),
    ("Intermittent Program or Algorithm Execution", 6),
    ("Program or Algorithm Execution Failure", 4),
    ("Failure to Transmit Record", 3),
    ("Low Test Results", 3),
]

EVENT_DEVICES = [
    ("Zio AT ECG (ZEUS)", "iRhythm Technologies, Inc."),
    ("Dario Blood Glucose Monitoring System", ""),
    ("GI Genius Intelligent Endoscopy Module", "Cosmo Artificial Intelligence-AI Ltd"),
    ("LINQ II Insertable Cardiac Monitor", "Medtronic Inc"),
    ("EnsoSleep", "EnsoData Inc"),
    ("d-Nav Insulin Guidance System", "Hygieia Inc"),
    ("Embrace", "Empatica Inc"),
    ("IDx-DR", "Digital Diagnostics Inc"),
    ("AccuFlow Infusion Pump", "AccuFlow Medical"),
    ("CardioAssist Defibrillator", "CardioAssist Corp"),
    ("HomeTherm Thermometer", "HomeTherm LLC"),
    ("NeuroStim Stimulator", "NeuroWave Inc"),
]


def build_fda_maude_1460() -> str:
    total = sum(count for _, count in EVENT_TYPE_COUNTS)
    assert total == sum(count for _, count in PROBLEM_COUNTS) == 1460
    types: list[str] = []
    for name, count in EVENT_TYPE_COUNTS:
        types.extend([name] * count)
    random.Random(31415).shuffle(types)
    problems: list[str | None] = []
    for name, count in PROBLEM_COUNTS:
        problems.extend([name] * count)
    random.Random(27182).shuffle(problems)
    records = []
    for i in range(total):
        device_name, manufacturer = EVENT_DEVICES[i % len(EVENT_DEVICES)]
        received = date(2019, 1, 1) + timedelta(days=(i * 13) % 2190)
        problem = problems[i]
        records.append(
            {
                "report_number": str(9000000 + i),
                "device_name": device_name,
                "manufacturer": manufacturer,
                "event_type": types[i],
                "date_received": received.isoformat(),
                "product_problems": [] if problem is None else [problem],
                "narrative": (
                    f"Field report {i}: the {device_name} exhibited the coded problem "
                    f"during routine use."
                ),
            }
        )
    document = {"dataset": "fda_maude", "snapshot_date": "2025-02-01", "records": records}
    return json.dumps(document, indent=2) + "\n"


def main() -> None:
    targets = {
        "cve_feed_50.json": build_cve_feed_50(),
        "icscert_140.txt": build_icscert_140(),
        "fda_maude_1460.json": build_fda_maude_1460(),
    }
    for name, text in targets.items():
        path = HERE / name
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
