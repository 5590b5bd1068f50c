"""Deterministic report files.

Layout of an output directory:

* ``<claim>.json``: one structured report per claim with keys ``claim``,
  ``inputs``, ``lhs``, ``rhs``, ``margin``, ``tolerance``, ``verdict``,
  ``artifacts`` (CSV paths relative to the directory) and ``metadata``.
  ``lhs``/``rhs`` hold ``value``, ``uncertainty``, ``method``
  (partition_sum, spectral, regression or sampled_fraction) and
  ``provenance`` (depth, scales, omega).
* ``<claim>_<table>.csv``: evidence with a header row, either
  ``epsilon,count,log_inv_eps,log_count`` or ``t,pressure``.
* ``summary.txt``: one human-readable line per claim.

Non-verification subcommands write ``<command>.json`` plus their CSV
evidence the same way. JSON is written with sorted keys, so identical inputs
give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import BowenDimError


class OutputError(BowenDimError):
    """The output directory cannot be created or written."""


def _ensure_dir(output_dir) -> Path:
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise OutputError(f"output directory {out} is not writable")
    return out


def write_json(path: Path, payload) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def _write_evidence(out: Path, stem: str, evidence: Dict[str, Tuple[Sequence[str], List]]) -> List[str]:
    paths = []
    for name in sorted(evidence):
        header, rows = evidence[name]
        rel = f"{stem}_{name}.csv"
        write_csv(out / rel, header, rows)
        paths.append(rel)
    return paths


def _stems(claims: Sequence[str]) -> List[str]:
    seen: Dict[str, int] = {}
    stems = []
    for c in claims:
        k = seen.get(c, 0)
        stems.append(c if k == 0 else f"{c}_{k}")
        seen[c] = k + 1
    return stems


def summary_line(d: dict) -> str:
    return (f"{d['claim']}: {d['verdict']}  lhs={d['lhs']['value']:.6f} ({d['lhs']['method']})  "
            f"rhs={d['rhs']['value']:.6f} ({d['rhs']['method']})  margin={d['margin']:+.6f}")


def emit_report(reports, output_dir, run_info: dict = None) -> List[Path]:
    """Write one JSON file per report, its CSV evidence and ``summary.txt``."""
    reports = list(reports)
    if not reports:
        raise ValueError("emit_report needs at least one report")
    out = _ensure_dir(output_dir)
    written = []
    lines = []
    for stem, rep in zip(_stems([r.claim for r in reports]), reports):
        rep.artifacts = _write_evidence(out, stem, rep.evidence)
        payload = rep.to_dict()
        if run_info is not None:
            payload["run"] = run_info
        write_json(out / f"{stem}.json", payload)
        written.append(out / f"{stem}.json")
        lines.append(summary_line(payload))
    with open(out / "summary.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(out / "summary.txt")
    return written


def emit_result(command: str, payload: dict, evidence: Dict[str, Tuple[Sequence[str], List]],
                output_dir) -> Path:
    """Write ``<command>.json`` and its CSV evidence for a non-verification subcommand."""
    out = _ensure_dir(output_dir)
    payload = dict(payload)
    payload["artifacts"] = _write_evidence(out, command, evidence)
    path = out / f"{command}.json"
    write_json(path, payload)
    return path
