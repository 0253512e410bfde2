"""Utterance-level evaluation metrics (MSE, Pearson, Spearman) and trial aggregation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SqaLabError
from .ioutil import atomic_write_text, open_text

PREDICTIONS_HEADER = ("sample_id", "prediction")


def _paired(truths, predictions, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truths, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if t.ndim != 1 or p.ndim != 1:
        raise SqaLabError("paired series must be one-dimensional", code="series_invalid")
    if t.shape != p.shape:
        raise SqaLabError(
            f"length mismatch: {t.size} truths vs {p.size} predictions",
            code="series_mismatch",
        )
    if t.size < min_len:
        raise SqaLabError(f"need at least {min_len} pairs, got {t.size}", code="series_invalid")
    if not (np.isfinite(t).all() and np.isfinite(p).all()):
        raise SqaLabError("non-finite value in paired series", code="series_invalid")
    return t, p


def mse(truths, predictions) -> float:
    """Mean squared error."""
    t, p = _paired(truths, predictions, 1)
    return float(np.mean((t - p) ** 2))


def lcc(truths, predictions) -> float:
    """Pearson linear correlation coefficient."""
    t, p = _paired(truths, predictions, 2)
    dt = t - t.mean()
    dp = p - p.mean()
    st = math.sqrt(float(dt @ dt))
    sp = math.sqrt(float(dp @ dp))
    if st == 0.0 or sp == 0.0:
        raise SqaLabError("zero variance: correlation undefined for a constant series",
                          code="constant_series")
    return float((dt @ dp) / (st * sp))


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values all receive the mean of the ranks they span."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j < v.size and v[order[j]] == v[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2  # mean of positions i+1 .. j
        i = j
    return ranks


def srcc(truths, predictions) -> float:
    """Spearman rank correlation: Pearson on tie-averaged ranks."""
    t, p = _paired(truths, predictions, 2)
    return lcc(average_ranks(t), average_ranks(p))


@dataclass(frozen=True)
class MetricSummary:
    """Mean and sample standard deviation (n-1 denominator) across trials."""

    mean: float
    std: float

    def format(self) -> str:
        return f"{self.mean:.3f}±{self.std:.3f}"


def aggregate_trials(values: Sequence[float]) -> MetricSummary:
    """Summarize per-trial metric values as mean and sample std."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise SqaLabError(f"need at least 2 trial values, got {v.size}", code="too_few_trials")
    mean = float(v.mean())
    std = math.sqrt(float(np.sum((v - mean) ** 2)) / (v.size - 1))
    return MetricSummary(mean=mean, std=std)


METRIC_NAMES = ("mse", "lcc", "srcc")


def evaluate(targets: Mapping[str, float], predictions: Mapping[str, float]) -> dict[str, float]:
    """Join predictions to targets on sample_id and compute all metrics.

    Ids present on only one side are an error, listed explicitly.
    """
    missing_pred = sorted(set(targets) - set(predictions))
    missing_true = sorted(set(predictions) - set(targets))
    if missing_pred or missing_true:
        parts = []
        if missing_pred:
            parts.append(f"no prediction for: {', '.join(missing_pred)}")
        if missing_true:
            parts.append(f"no target for: {', '.join(missing_true)}")
        raise SqaLabError("; ".join(parts), code="join_mismatch")
    ids = sorted(targets)
    t = [targets[i] for i in ids]
    p = [predictions[i] for i in ids]
    return {"mse": mse(t, p), "lcc": lcc(t, p), "srcc": srcc(t, p)}


# ---------------------------------------------------------------------------
# File formats owned by this module
# ---------------------------------------------------------------------------


def read_predictions_csv(source) -> dict[str, float]:
    out: dict[str, float] = {}
    with open_text(source) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PREDICTIONS_HEADER:
            raise SqaLabError(
                f"bad predictions header {header!r}, expected {','.join(PREDICTIONS_HEADER)}",
                code="predictions_format",
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise SqaLabError(
                    f"line {line}: expected 2 fields, got {len(row)}",
                    code="predictions_format",
                )
            sid = row[0].strip()
            try:
                value = float(row[1])
            except ValueError:
                raise SqaLabError(
                    f"line {line}: prediction {row[1]!r} is not a number",
                    code="predictions_format",
                ) from None
            if not math.isfinite(value):
                raise SqaLabError(f"line {line}: non-finite prediction", code="predictions_format")
            if sid in out:
                raise SqaLabError(
                    f"line {line}: duplicate sample_id {sid!r}", code="predictions_format"
                )
            out[sid] = value
    if not out:
        raise SqaLabError("predictions file has no rows", code="predictions_format")
    return out


def render_predictions_csv(predictions: Mapping[str, float]) -> str:
    lines = [",".join(PREDICTIONS_HEADER)]
    for sid in sorted(predictions):
        lines.append(f"{sid},{predictions[sid]:.6f}")
    return "\n".join(lines) + "\n"


def render_report_tsv(values: Mapping[str, float]) -> str:
    """Single-run report: one ``metric<TAB>value`` row per metric."""
    lines = ["metric\tvalue"]
    for name in METRIC_NAMES:
        if name in values:
            lines.append(f"{name}\t{values[name]:.6f}")
    return "\n".join(lines) + "\n"


def render_summary_report_tsv(summaries: Mapping[str, MetricSummary]) -> str:
    """Multi-trial report: one ``metric<TAB>mean<TAB>std`` row per metric."""
    lines = ["metric\tmean\tstd"]
    for name in METRIC_NAMES:
        if name in summaries:
            s = summaries[name]
            lines.append(f"{name}\t{s.mean:.6f}\t{s.std:.6f}")
    return "\n".join(lines) + "\n"


def write_predictions_csv(path, predictions: Mapping[str, float]) -> None:
    atomic_write_text(path, render_predictions_csv(predictions))
