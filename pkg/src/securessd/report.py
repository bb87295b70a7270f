"""Report emission and aggregation.

A report is line-oriented structured text, one ``key<TAB>value`` record
per line, schema-versioned, carrying the full config echo so any run can
be reproduced bit-identically from its report alone.  The summary view
renders normalized-speedup tables and the per-phase breakdown columns
(load, compute, encryption, verification) as columnar text suitable for
plotting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .config import RunConfig, config_text, parse_config
from .engine import RunResult

SCHEMA_VERSION = "1"

#: Charged overhead constants echoed verbatim into every report.
CONSTANTS = {
    "tee_create_us": "95",
    "tee_delete_us": "58",
    "context_switch_us": "3.8",
    "mem_encrypt_ns": "102.6",
    "mem_verify_ns": "151.2",
    "aes_pad_ns": "60",
    "cipher_energy_nj_per_4k": "10.3",
    "cipher_area_fraction": "0.016",
}


class SchemaMismatch(Exception):
    pass


def render_report(result: RunResult) -> str:
    out = io.StringIO()

    def put(key, value):
        out.write(f"{key}\t{value}\n")

    put("schema", SCHEMA_VERSION)
    put("workload", result.cfg.workload)
    put("mode", result.cfg.mode)
    put("seed", result.cfg.seed)
    put("total_ns", result.total_ns)
    for name, value in result.parts.items():
        put(f"parts.{name}_ns", value)
    for name, value in result.breakdown.items():
        put(f"breakdown.{name}_ns", value)
    for name, value in result.counters.items():
        put(f"counters.{name}", value)
    for name, value in result.traffic.items():
        put(f"traffic.{name}", value)
    for name, value in sorted(result.answer.items()):
        put(f"answer.{name}", value)
    put("energy.cipher_nj", round(result.energy_nj, 3))
    put("dataset.checksum", result.dataset_checksum)
    for name, value in CONSTANTS.items():
        put(f"constants.{name}", value)
    for line in config_text(result.cfg).splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("["):
            section = line.strip("[]")
        else:
            key, _, value = line.partition("=")
            put(f"config.{section}.{key.strip()}", value.strip())
    return out.getvalue()


def parse_report(text: str) -> dict[str, str]:
    record: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise SchemaMismatch(f"line {ln}: not a key<TAB>value record")
        key, value = line.split("\t", 1)
        record[key] = value
    if record.get("schema") != SCHEMA_VERSION:
        raise SchemaMismatch(f"unsupported schema {record.get('schema')!r}")
    return record


def config_from_report(record: dict[str, str]) -> RunConfig:
    """Rebuild the exact RunConfig from a report's config echo."""
    sections: dict[str, list[str]] = {}
    for key, value in record.items():
        if key.startswith("config."):
            _, section, name = key.split(".", 2)
            sections.setdefault(section, []).append(f"{name} = {value}")
    text = "\n".join(f"[{s}]\n" + "\n".join(lines)
                     for s, lines in sections.items())
    return parse_config(text)


BREAKDOWN_COLUMNS = ("load", "compute", "encryption", "verification")


def summarize(records: list[dict[str, str]], baseline_mode: str = "HOST") -> str:
    """Speedup table normalized to the chosen baseline plus per-phase
    breakdown columns, as columnar text (one row per report)."""
    if not records:
        raise SchemaMismatch("no reports to summarize")
    baselines = {r["workload"]: int(r["total_ns"]) for r in records
                 if r["mode"] == baseline_mode}
    others = [r for r in records if r["mode"] != baseline_mode]
    if others and not any(r["workload"] in baselines for r in others):
        raise SchemaMismatch(
            f"no workload overlap with baseline mode {baseline_mode}")
    out = io.StringIO()
    header = ["workload", "mode", "total_ns", "speedup_x1000"] + \
        [f"{c}_ns" for c in BREAKDOWN_COLUMNS]
    out.write("\t".join(header) + "\n")
    for r in sorted(records, key=lambda r: (r["workload"], r["mode"])):
        total = int(r["total_ns"])
        base = baselines.get(r["workload"])
        speedup = (base * 1000 // total) if base else 0
        row = [r["workload"], r["mode"], str(total), str(speedup)]
        row += [r.get(f"breakdown.{c}_ns", "0") for c in BREAKDOWN_COLUMNS]
        out.write("\t".join(row) + "\n")
    return out.getvalue()
