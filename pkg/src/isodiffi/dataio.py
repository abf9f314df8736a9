"""CSV ingestion, the Glass preset, and model/report persistence."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .diffi import ImportanceReport
from .errors import CorruptFileError, InvalidArgumentError, ParseError, UnsupportedVersionError
from .forest import DataMatrix, ForestModel, default_feature_names, model_from_dict, model_to_dict

REPORT_FORMAT = "isodiffi-report"
REPORT_VERSION = 1
REPORT_COLUMNS = ("feature", "score", "rank", "defined", "count_inlier", "count_outlier",
                  "cumulative_inlier", "cumulative_outlier")

GLASS_FEATURES = ("RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe")
GLASS_WINDOW_CLASSES = (1, 2, 3, 4)
GLASS_NON_WINDOW_CLASSES = (5, 6, 7)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """A data matrix with optional binary labels (1 = outlier).

    ``classes`` keeps the raw class column of a preset before remapping.
    """

    data: DataMatrix
    labels: np.ndarray | None = None
    name: str = ""
    classes: np.ndarray | None = None

    def __post_init__(self):
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (self.data.n,):
                raise InvalidArgumentError(f"{labels.shape[0]} labels for {self.data.n} rows")
            if not np.isin(labels, (0, 1)).all():
                raise InvalidArgumentError("labels must be 0 or 1")
            object.__setattr__(self, "labels", labels.astype(np.int64))


def format_float(v: float) -> str:
    """Shortest string that parses back to the same double."""
    return repr(float(v))


def _parse_float(cell: str, row: int, col: int | str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"cannot parse {cell!r} as a number", row, col) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {cell!r}", row, col)
    return v


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_rows(path, delimiter: str) -> list[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, [c.strip() for c in r]) for i, r in enumerate(csv.reader(fh, delimiter=delimiter))]
    return [(i, r) for i, r in rows if any(r)]


def load_csv(path, label_column: str | int | None = None, delimiter: str = ",", *,
             header: bool | None = None, label_map: Mapping | None = None,
             ignore_columns: Sequence[str | int] = (), name: str | None = None) -> LabeledDataset:
    """Read a numeric CSV into a :class:`LabeledDataset`.

    Args:
        path: File to read.
        label_column: Name (or 0-based index) of the label column, if any.
        delimiter: Field separator.
        header: Whether the first row holds column names. Detected when
            None: a first row with any non-numeric cell is a header.
        label_map: Maps raw label values to 0/1. Without it labels must
            already be 0 or 1.
        ignore_columns: Names or 0-based indices of columns to skip.
        name: Dataset name, defaulting to the file stem.

    Raises:
        ParseError: A cell is not a finite number or a row is ragged. Row
            numbers are 1-based file lines.
        InvalidArgumentError: ``label_column`` does not exist.
    """
    rows = _read_rows(path, delimiter)
    if not rows:
        raise ParseError("file holds no rows", 1, 1)
    if header is None:
        header = not all(_is_number(c) for c in rows[0][1])
    names = rows[0][1] if header else None
    body = rows[1:] if header else rows
    if not body:
        raise ParseError("file holds no data rows", rows[0][0] + 1, 1)
    width = len(names) if names else len(body[0][1])

    def locate(col):
        if isinstance(col, int) and 0 <= col < width:
            return col
        if isinstance(col, str) and names is not None and col in names:
            return names.index(col)
        raise InvalidArgumentError(f"column {col!r} not found")

    label_idx = None if label_column is None else locate(label_column)
    skip = {locate(c) for c in ignore_columns}
    feat_idx = [j for j in range(width) if j != label_idx and j not in skip]
    if not feat_idx:
        raise InvalidArgumentError("no feature columns left")
    col_name = (lambda j: names[j]) if names else (lambda j: j + 1)

    values = np.empty((len(body), len(feat_idx)))
    raw_labels = []
    for r, (lineno, cells) in enumerate(body):
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", lineno, len(cells))
        for k, j in enumerate(feat_idx):
            values[r, k] = _parse_float(cells[j], lineno, col_name(j))
        if label_idx is not None:
            raw_labels.append(_parse_label(cells[label_idx], label_map, lineno, col_name(label_idx)))

    if names:
        feature_names = tuple(names[j] for j in feat_idx)
    else:
        feature_names = default_feature_names(len(feat_idx))
    labels = np.array(raw_labels, dtype=np.int64) if label_idx is not None else None
    return LabeledDataset(DataMatrix(values, feature_names), labels, name or Path(path).stem)


def _parse_label(cell: str, label_map, row, col) -> int:
    v = _parse_float(cell, row, col)
    key = int(v) if v.is_integer() else v
    if label_map is not None:
        if key not in label_map and cell not in label_map:
            raise ParseError(f"label {cell!r} has no mapping", row, col)
        return int(label_map.get(key, label_map.get(cell)))
    if key not in (0, 1):
        raise ParseError(f"label {cell!r} is not 0 or 1", row, col)
    return int(key)


def save_csv(path, dataset: LabeledDataset | DataMatrix, labels=None, label_name: str = "label",
             delimiter: str = ",") -> None:
    """Write features (and labels, if any) with a header row."""
    if isinstance(dataset, LabeledDataset):
        data, labels = dataset.data, dataset.labels if labels is None else labels
    else:
        data = dataset
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        head = list(data.feature_names) + ([label_name] if labels is not None else [])
        w.writerow(head)
        for i, row in enumerate(data.values):
            cells = [format_float(v) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            w.writerow(cells)


def load_glass(path, *, drop_duplicates: bool = True) -> LabeledDataset:
    """Load the UCI Glass Identification file, window glass as inliers.

    Accepts the raw ``glass.data`` layout (Id, nine oxides, Type; no header)
    or a CSV with a header naming the oxides and a ``Type`` column. Classes
    1-4 (window glass) map to label 0, classes 5-7 to label 1. Exact
    duplicate feature rows are dropped, keeping the first.
    """
    rows = _read_rows(path, ",")
    if not rows:
        raise ParseError("file holds no rows", 1, 1)
    first = rows[0][1]
    if all(_is_number(c) for c in first):
        body = rows
        if len(first) == 11:
            feat_cols, type_col = list(range(1, 10)), 10
        elif len(first) == 10:
            feat_cols, type_col = list(range(0, 9)), 9
        else:
            raise ParseError(f"expected 10 or 11 fields, found {len(first)}", rows[0][0], len(first))
    else:
        lookup = {c.lower(): j for j, c in enumerate(first)}
        missing = [f for f in (*GLASS_FEATURES, "Type") if f.lower() not in lookup]
        if missing:
            raise InvalidArgumentError(f"glass file lacks columns {missing}")
        feat_cols = [lookup[f.lower()] for f in GLASS_FEATURES]
        type_col = lookup["type"]
        body = rows[1:]
    width = len(first)
    values, classes = [], []
    for lineno, cells in body:
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", lineno, len(cells))
        values.append([_parse_float(cells[j], lineno, j + 1) for j in feat_cols])
        c = _parse_float(cells[type_col], lineno, type_col + 1)
        if not c.is_integer() or int(c) not in GLASS_WINDOW_CLASSES + GLASS_NON_WINDOW_CLASSES:
            raise ParseError(f"unknown glass class {cells[type_col]!r}", lineno, type_col + 1)
        classes.append(int(c))
    X = np.array(values)
    cls = np.array(classes, dtype=np.int64)
    if drop_duplicates:
        _, first_idx = np.unique(X, axis=0, return_index=True)
        keep = np.sort(first_idx)
        X, cls = X[keep], cls[keep]
    labels = np.isin(cls, GLASS_NON_WINDOW_CLASSES).astype(np.int64)
    return LabeledDataset(DataMatrix(X, GLASS_FEATURES), labels, "glass", cls)


# --- JSON helpers --------------------------------------------------------


def write_json(path, doc) -> None:
    """Deterministic JSON: sorted keys, fixed indent, trailing newline."""
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{os.fspath(path)} is not valid JSON: {exc}") from exc


def save_model(model: ForestModel, path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path) -> ForestModel:
    return model_from_dict(read_json(path))


# --- importance reports --------------------------------------------------


def report_rows(report: ImportanceReport) -> list[dict]:
    rank = {j: r + 1 for r, j in enumerate(report.ranking)}
    return [
        {
            "feature": report.feature_names[j],
            "score": float(report.scores[j]),
            "rank": rank[j],
            "defined": bool(report.defined[j]),
            "count_inlier": int(report.counts_inlier[j]),
            "count_outlier": int(report.counts_outlier[j]),
            "cumulative_inlier": float(report.cumulative_inlier[j]),
            "cumulative_outlier": float(report.cumulative_outlier[j]),
        }
        for j in range(report.p)
    ]


def report_to_dict(report: ImportanceReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "kind": report.kind,
        "status": report.status,
        "features": report_rows(report),
    }


def report_from_dict(doc: dict) -> ImportanceReport:
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise CorruptFileError("not an isodiffi report document")
    if doc.get("version") != REPORT_VERSION:
        raise UnsupportedVersionError(f"unsupported report version {doc.get('version')!r}")
    try:
        return _report_from_rows(doc["features"], doc["kind"], doc["status"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFileError(f"malformed report: {exc!r}") from exc


def _report_from_rows(rows: Sequence[dict], kind: str, status: str) -> ImportanceReport:
    def col(key, dtype):
        return np.array([r[key] for r in rows], dtype=dtype)

    return ImportanceReport(
        scores=col("score", np.float64),
        kind=kind,
        counts_inlier=col("count_inlier", np.int64),
        counts_outlier=col("count_outlier", np.int64),
        cumulative_inlier=col("cumulative_inlier", np.float64),
        cumulative_outlier=col("cumulative_outlier", np.float64),
        feature_names=tuple(r["feature"] for r in rows),
        defined=col("defined", bool),
        status=status,
    )


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def save_report(report: ImportanceReport, path, fmt: str | None = None) -> None:
    """Write a report as CSV or JSON (chosen by ``fmt`` or the file suffix)."""
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        write_json(path, report_to_dict(report))
        return
    if fmt != "csv":
        raise InvalidArgumentError(f"unknown format {fmt!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# kind={report.kind} status={report.status}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report_rows(report):
            w.writerow([_fmt_cell(row[c]) for c in REPORT_COLUMNS])


def load_report(path, fmt: str | None = None) -> ImportanceReport:
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        return report_from_dict(read_json(path))
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise CorruptFileError("report CSV lacks its kind/status line")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split())
    reader = csv.DictReader(lines[1:])
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise CorruptFileError("unexpected report columns")
    rows = []
    for r in reader:
        rows.append({
            "feature": r["feature"],
            "score": float(r["score"]),
            "defined": r["defined"] == "1",
            "count_inlier": int(r["count_inlier"]),
            "count_outlier": int(r["count_outlier"]),
            "cumulative_inlier": float(r["cumulative_inlier"]),
            "cumulative_outlier": float(r["cumulative_outlier"]),
        })
    try:
        return _report_from_rows(rows, meta["kind"], meta["status"])
    except KeyError as exc:
        raise CorruptFileError(f"report CSV header lacks {exc}") from exc


def save_table(path, header: Sequence[str], rows: Sequence[Sequence], fmt: str = "csv") -> None:
    """Write a plain table as CSV or as JSON records."""
    if fmt == "json":
        write_json(path, [dict(zip(header, map(_plain, r))) for r in rows])
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt_cell(_flat(v)) for v in r])


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def _flat(v):
    v = _plain(v)
    return " ".join(_fmt_cell(x) for x in v) if isinstance(v, list) else v
