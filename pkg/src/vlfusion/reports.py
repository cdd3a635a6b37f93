"""CSV and plain-text renderings of the precision/recall and 3D error tables.

PR CSV columns: ``table,confidence_threshold,iou_threshold,tp,fp,fn,precision,recall``
where ``table`` is ``pure`` or ``tracked``. Counts may be left empty when only
the ratios are known.

Error CSV columns: ``method,source,axis,mae,rmse,n`` with ``method`` one of
``filtering`` (raw median points) or ``cvkf`` (filtered estimates).
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, NamedTuple, Sequence

from .evaluation import ErrorReport, PrCell

PR_FIELDS = ("table", "confidence_threshold", "iou_threshold", "tp", "fp", "fn", "precision", "recall")
ERROR_FIELDS = ("method", "source", "axis", "mae", "rmse", "n")

PR_GROUPS = (("pure", "Pure Detection"), ("tracked", "Tracked w/ SORT"))
ERROR_GROUPS = (("filtering", ("Filtering only",)), ("cvkf", ("Filtering and", "CVKF")))
SOURCES = (("rgb", "RGB detection"), ("event", "Event detection"))
AXES = ("X", "Y", "Z", "XZ")


class PrValue(NamedTuple):
    table: str
    confidence_threshold: float
    iou_threshold: float
    precision: float
    recall: float
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None


class ErrorValue(NamedTuple):
    method: str
    source: str
    axis: str
    mae: float
    rmse: float
    n: int | None = None


def pr_values(table: str, cells: Iterable[PrCell]) -> list[PrValue]:
    return [PrValue(table, c.confidence_threshold, c.iou_threshold, c.precision, c.recall, c.tp, c.fp, c.fn)
            for c in cells]


def error_values(method: str, source: str, report: ErrorReport) -> list[ErrorValue]:
    return [ErrorValue(method, source, a, report.axis(a).mae, report.axis(a).rmse, report.n) for a in AXES]


def _num(x, digits=6):
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return "nan" if math.isnan(x) else f"{x:.{digits}f}"


def _opt_int(s):
    return int(s) if s not in ("", None) else None


def write_pr_csv(path, values: Iterable[PrValue]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PR_FIELDS)
        for v in values:
            w.writerow([v.table, _num(v.confidence_threshold, 2), _num(v.iou_threshold, 2),
                        _num(v.tp), _num(v.fp), _num(v.fn), _num(v.precision), _num(v.recall)])


def read_pr_csv(path) -> list[PrValue]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(PrValue(r["table"], float(r["confidence_threshold"]), float(r["iou_threshold"]),
                           float(r["precision"]), float(r["recall"]),
                           _opt_int(r.get("tp")), _opt_int(r.get("fp")), _opt_int(r.get("fn"))))
    return out


def write_error_csv(path, values: Iterable[ErrorValue]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ERROR_FIELDS)
        for v in values:
            w.writerow([v.method, v.source, v.axis, _num(v.mae), _num(v.rmse), _num(v.n)])


def read_error_csv(path) -> list[ErrorValue]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [ErrorValue(r["method"], r["source"], r["axis"], float(r["mae"]), float(r["rmse"]), _opt_int(r.get("n")))
            for r in rows]


# --------------------------------------------------------------------------
# text tables


def _fmt_cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    return f"{x:.3f}"


def _fmt_grid(x: float) -> str:
    return f"{x:.2f}"


def _grid(values: Sequence[float]) -> list[float]:
    return sorted({round(v, 6) for v in values})


def render_pr_table(values: Sequence[PrValue], sweep: str, fixed: float, title: str = "") -> str:
    """Two row groups (pure, tracked) of precision and recall over one threshold sweep.

    ``sweep="iou"`` lists IoU thresholds at confidence ``fixed``;
    ``sweep="confidence"`` lists confidence thresholds at IoU ``fixed``.
    """
    if sweep == "iou":
        chosen = [v for v in values if round(v.confidence_threshold, 6) == round(fixed, 6)]
        key = lambda v: round(v.iou_threshold, 6)  # noqa: E731
        heading = f"IoU thresholds @ confidence threshold = {fixed:g}"
    elif sweep == "confidence":
        chosen = [v for v in values if round(v.iou_threshold, 6) == round(fixed, 6)]
        key = lambda v: round(v.confidence_threshold, 6)  # noqa: E731
        heading = f"Confidence thresholds @ IoU threshold = {fixed:g}"
    else:
        raise ValueError(f"unknown sweep {sweep!r}")
    grid = _grid([key(v) for v in chosen])
    lookup = {(v.table, key(v)): v for v in chosen}

    label_w = max(len(name) for _, name in PR_GROUPS)
    metric_w = len("Precision")
    col_w = 6
    lines = []
    if title:
        lines.append(title)
    lines.append(" " * (label_w + metric_w + 4) + heading)
    lines.append(" " * (label_w + metric_w + 4) + " ".join(_fmt_grid(g).rjust(col_w) for g in grid))
    rule = "-" * len(lines[-1])
    lines.append(rule)
    for table, name in PR_GROUPS:
        for i, metric in enumerate(("Precision", "Recall")):
            label = name if i == 0 else ""
            cells = []
            for g in grid:
                v = lookup.get((table, g))
                cells.append(_fmt_cell(None if v is None else getattr(v, metric.lower())).rjust(col_w))
            lines.append(f"{label:<{label_w}}  {metric:<{metric_w}}  " + " ".join(cells))
        lines.append(rule)
    return "\n".join(lines) + "\n"


def render_error_table(values: Sequence[ErrorValue], title: str = "") -> str:
    """Row groups per method (X/Y/Z/XZ rows), MAE/RMSE column pairs per source."""
    lookup = {(v.method, v.source, v.axis.upper()): v for v in values}
    label_w = max(len(part) for _, parts in ERROR_GROUPS for part in parts)
    axis_w = 2
    col_w = 7
    pair_w = 2 * col_w + 1
    lead = " " * (label_w + axis_w + 4)
    lines = []
    if title:
        lines.append(title)
    lines.append(lead + "   ".join(name.center(pair_w) for _, name in SOURCES))
    lines.append(lead + "   ".join(("-" * pair_w) for _ in SOURCES))
    lines.append(lead + "   ".join("MAE".rjust(col_w) + " " + "RMSE".rjust(col_w) for _ in SOURCES))
    rule = "-" * len(lines[-1])
    lines.append(rule)
    for method, label_lines in ERROR_GROUPS:
        for i, axis in enumerate(AXES):
            label = label_lines[i] if i < len(label_lines) else ""
            pairs = []
            for source, _ in SOURCES:
                v = lookup.get((method, source, axis))
                mae = None if v is None else v.mae
                rmse = None if v is None else v.rmse
                pairs.append(_fmt_cell(mae).rjust(col_w) + " " + _fmt_cell(rmse).rjust(col_w))
            lines.append(f"{label:<{label_w}}  {axis:<{axis_w}}  " + "   ".join(pairs))
        lines.append(rule)
    return "\n".join(lines) + "\n"
