"""Confusion matrix and precision/recall/F1 with anomalous as the positive class."""
from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping

from .core import ParseError, parse_date


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float

    def rounded(self, places: int = 2) -> tuple[float, float, float]:
        return tuple(round_half_away(v, places) for v in (self.precision, self.recall, self.f1))


def round_half_away(value: float, places: int = 2) -> float:
    """Round half away from zero on the shortest decimal repr of ``value``."""
    q = Decimal(1).scaleb(-places)
    d = Decimal(repr(value))
    rounded = abs(d).quantize(q, rounding=ROUND_HALF_UP)
    return float(rounded.copy_sign(d))


def confusion(predictions: Mapping[dt.date, int], truth: Mapping[dt.date, int]) -> ConfusionMatrix:
    """Counts over dates present in both maps."""
    common = set(predictions) & set(truth)
    if not common:
        raise ValueError("no dates shared between predictions and ground truth")
    tp = fp = fn = tn = 0
    for d in common:
        p, t = int(predictions[d]), int(truth[d])
        if p and t:
            tp += 1
        elif p:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Zero denominators give 0 rather than 1."""
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(precision, recall, f1)


def read_prediction_csv(raw_text: str, source: str | None = None):
    """Parse a prediction CSV with at least ``date,predicted,label`` columns.

    Returns ``(predictions, labels)``; blank labels are left out of ``labels``.
    """
    reader = csv.DictReader(io.StringIO(raw_text))
    missing = {"date", "predicted"} - set(reader.fieldnames or ())
    if missing:
        raise ParseError(f"missing column(s) {sorted(missing)}", None, source)
    preds: dict[dt.date, int] = {}
    labels: dict[dt.date, int] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            date = parse_date(row["date"])
        except ValueError:
            raise ParseError(f"unparseable date {row['date']!r}", lineno, source) from None
        if row["predicted"] not in ("0", "1"):
            raise ParseError(f"predicted must be 0 or 1, got {row['predicted']!r}", lineno, source)
        preds[date] = int(row["predicted"])
        lab = (row.get("label") or "").strip()
        if lab:
            if lab not in ("0", "1"):
                raise ParseError(f"label must be 0, 1 or blank, got {lab!r}", lineno, source)
            labels[date] = int(lab)
    return preds, labels


def format_report(cm: ConfusionMatrix, m: Metrics) -> str:
    p, r, f = m.rounded(2)
    return (
        "predicted \\ desired   anomalous  typical\n"
        f"anomalous             {cm.tp:9d}  {cm.fp:7d}\n"
        f"typical               {cm.fn:9d}  {cm.tn:7d}\n"
        f"precision {p:.2f}\nrecall {r:.2f}\nf1 {f:.2f}\n"
    )
