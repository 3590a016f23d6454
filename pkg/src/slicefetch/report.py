"""Report serialization: canonical JSON (byte-stable for identical runs) and
CSV export of the per-PIE table."""

from __future__ import annotations

import csv
import io
import json

PIE_CSV_COLUMNS = [
    "index", "ip", "bhr", "state", "lookahead", "sent", "useless", "resets",
    "validations_passed", "encounters", "armed_at_encounter", "slice_len",
    "draft_len", "hit_depth_ewma",
]


def canonical_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def pie_table_csv(report: dict) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=PIE_CSV_COLUMNS)
    writer.writeheader()
    for row in report.get("pies", []):
        writer.writerow({k: row.get(k) for k in PIE_CSV_COLUMNS})
    return out.getvalue()
