"""Deterministic CSV/JSON emission with config fingerprints.

Every output file carries the tool version and a sha256 of the canonical
config JSON, so identical configs are provably behind identical files;
floats are serialized with 17 significant digits (exact double round-trip)
and no timestamps are embedded.
"""

from __future__ import annotations

import hashlib
import json
import math

__all__ = ["TOOL_VERSION", "config_hash", "format_float", "write_csv", "write_json"]

TOOL_VERSION = "0.1.0"


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical (sorted-keys, compact) JSON encoding."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def format_float(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def _meta_lines(meta: dict) -> list:
    lines = [f"# tool: diracnlft {TOOL_VERSION}"]
    for key in sorted(meta):
        lines.append(f"# {key}: {meta[key]}")
    return lines


def write_csv(path: str, columns, rows, meta: dict | None = None) -> None:
    """Write rows (iterables matching ``columns``) with a comment header."""
    lines = _meta_lines(meta or {})
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_float(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict, meta: dict | None = None) -> None:
    """Write a payload dict with an embedded ``meta`` block."""
    doc = {"meta": {"tool": f"diracnlft {TOOL_VERSION}", **(meta or {})}}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
