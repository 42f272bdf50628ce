"""File formats for kernels, priors and entropy reports.

Kernel/prior CSV: a header row of target-state labels followed by one row of
probabilities per source state (a prior is the single-row case).  Kernel/prior
JSON: ``{"labels": [...], "rows": [[...]]}``; a kernel with distinct source
labels may add ``"source_labels"``.  Entropy reports serialize as flat JSON
with fixed keys.  All numeric output uses 17 significant digits so 64-bit
floats round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .discrete import KL_FAMILY_KEYS, DiscreteDistribution, EntropyReport, TransitionKernel

__all__ = [
    "InputFormatError",
    "load_distribution",
    "load_kernel",
    "distribution_from_json_dict",
    "kernel_from_json_dict",
    "report_to_json_dict",
    "format_float",
    "write_csv",
    "write_json",
    "sha256_file",
]

REPORT_KEYS = ("s0", "st", "avg_st", "avg_sr", "mutual_info") + KL_FAMILY_KEYS


class InputFormatError(ValueError):
    """Malformed kernel/prior/config file; the message carries line/column."""


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def _parse_rows(path: Path) -> tuple[list[str], list[list[float]]]:
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: line 1: empty file") from None
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise InputFormatError(f"{path}: line 1: header must list the target-state labels")
        rows = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(cell.strip() == "" for cell in raw):
                continue
            if len(raw) != len(header):
                raise InputFormatError(
                    f"{path}: line {line_no}: expected {len(header)} columns, got {len(raw)}"
                )
            values = []
            for col, cell in enumerate(raw, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise InputFormatError(
                        f"{path}: line {line_no}, column {col}: not a number: {cell.strip()!r}"
                    ) from None
            rows.append(values)
        if not rows:
            raise InputFormatError(f"{path}: line 2: no data rows")
    return header, rows


def _load_json(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise InputFormatError(f"{path}: line 1: expected a JSON object")
    return payload


def distribution_from_json_dict(payload: dict, origin: str = "<json>") -> DiscreteDistribution:
    try:
        labels = tuple(payload["labels"])
        rows = payload["rows"]
    except (KeyError, TypeError):
        raise InputFormatError(f"{origin}: expected keys 'labels' and 'rows'") from None
    if len(rows) != 1:
        raise InputFormatError(f"{origin}: a prior must have exactly one row, got {len(rows)}")
    try:
        return DiscreteDistribution(labels, np.asarray(rows[0], dtype=float))
    except ValueError as exc:
        raise InputFormatError(f"{origin}: {exc}") from None


def kernel_from_json_dict(payload: dict, origin: str = "<json>") -> TransitionKernel:
    try:
        labels = tuple(payload["labels"])
        rows = np.asarray(payload["rows"], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise InputFormatError(f"{origin}: expected keys 'labels' and numeric 'rows'") from None
    source = tuple(payload["source_labels"]) if "source_labels" in payload else None
    elapsed = payload.get("elapsed_time")
    if source is None:
        source = labels if rows.shape[0] == len(labels) else tuple(range(rows.shape[0]))
    try:
        return TransitionKernel(source, labels, rows, elapsed)
    except ValueError as exc:
        raise InputFormatError(f"{origin}: {exc}") from None


def load_distribution(path) -> DiscreteDistribution:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return distribution_from_json_dict(_load_json(path), str(path))
    header, rows = _parse_rows(path)
    if len(rows) != 1:
        raise InputFormatError(f"{path}: a prior must have exactly one data row, got {len(rows)}")
    try:
        return DiscreteDistribution(tuple(header), np.asarray(rows[0]))
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None


def load_kernel(path) -> TransitionKernel:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return kernel_from_json_dict(_load_json(path), str(path))
    header, rows = _parse_rows(path)
    try:
        return TransitionKernel(tuple(range(len(rows))), tuple(header), np.asarray(rows))
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None


def report_to_json_dict(report: EntropyReport) -> dict:
    return report.to_json_dict()


def write_csv(path, header, rows) -> None:
    """Write rows of mixed scalars; floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def _default(obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError(f"not JSON serializable: {type(obj)}")

    text = json.dumps(payload, indent=2, sort_keys=True, default=_default)
    path.write_text(text + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()
