"""Frame-feature matrices and their CSV interchange format.

A feature matrix is a (frames x features) float array, one per sample.
On disk: header ``sample_id,frame_idx,f0,...,f{D-1}``, one row per
frame, frame indices dense from 0 within each sample, and a single
feature width per file. Values are written with full precision so a
round trip is exact.
"""

from __future__ import annotations

import csv
import math
from typing import Mapping, Sequence

import numpy as np

from .errors import SqaLabError
from .ioutil import atomic_write_text, open_text


def check_feature_matrix(m, name: str = "features") -> np.ndarray:
    """Validate one matrix: 2-D, at least one row, all entries finite."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise SqaLabError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}",
                          code="features_format")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SqaLabError(f"{name}: empty matrix {arr.shape}", code="features_format")
    if not np.isfinite(arr).all():
        raise SqaLabError(f"{name}: non-finite entries", code="features_format")
    return arr


def check_feature_matrices(X) -> list[np.ndarray]:
    """Validate a sequence of matrices and their shared feature width."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    try:
        items = list(X)
    except TypeError:
        raise SqaLabError("expected a sequence of feature matrices", code="features_format")
    if not items:
        raise SqaLabError("no feature matrices given", code="features_format")
    mats = [check_feature_matrix(m, name=f"features[{i}]") for i, m in enumerate(items)]
    dims = {m.shape[1] for m in mats}
    if len(dims) > 1:
        raise SqaLabError(
            f"inconsistent feature widths {sorted(dims)} across matrices",
            code="features_format",
        )
    return mats


def render_features_csv(features: Mapping[str, np.ndarray]) -> str:
    if not features:
        raise SqaLabError("no feature matrices to write", code="features_format")
    dims = {np.asarray(m).shape[1] for m in features.values()}
    if len(dims) > 1:
        raise SqaLabError(
            f"inconsistent feature widths {sorted(dims)} across samples",
            code="features_format",
        )
    d = dims.pop()
    header = ["sample_id", "frame_idx"] + [f"f{j}" for j in range(d)]
    lines = [",".join(header)]
    for sid in sorted(features):
        m = check_feature_matrix(features[sid], name=f"sample {sid!r}")
        for t in range(m.shape[0]):
            row = ",".join(repr(float(v)) for v in m[t])
            lines.append(f"{sid},{t},{row}")
    return "\n".join(lines) + "\n"


def read_features_csv(source) -> dict[str, np.ndarray]:
    """Read a features CSV back into {sample_id: matrix}.

    Rejects ragged rows, duplicate or non-dense frame indices, and
    non-finite values, naming the offending sample and line.
    """
    with open_text(source) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SqaLabError("empty features file (missing header)", code="features_format")
        header = [h.strip() for h in header]
        d = len(header) - 2
        expected = ["sample_id", "frame_idx"] + [f"f{j}" for j in range(d)]
        if d < 1 or header != expected:
            raise SqaLabError(
                f"bad features header {header!r}, expected sample_id,frame_idx,f0,...",
                code="features_format",
            )
        rows: dict[str, dict[int, np.ndarray]] = {}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2 + d:
                raise SqaLabError(
                    f"line {line}: ragged row with {len(row)} fields, expected {2 + d}",
                    code="features_format",
                )
            sid = row[0].strip()
            try:
                idx = int(row[1])
                values = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError:
                raise SqaLabError(
                    f"line {line}: non-numeric frame_idx or feature value",
                    code="features_format",
                ) from None
            if idx < 0:
                raise SqaLabError(f"line {line}: negative frame_idx {idx}",
                                  code="features_format")
            if not np.isfinite(values).all():
                raise SqaLabError(
                    f"line {line}: non-finite feature value in sample {sid!r}",
                    code="features_format",
                )
            frames = rows.setdefault(sid, {})
            if idx in frames:
                raise SqaLabError(
                    f"line {line}: duplicate frame_idx {idx} in sample {sid!r}",
                    code="features_format",
                )
            frames[idx] = values
    if not rows:
        raise SqaLabError("features file has no data rows", code="features_format")
    out: dict[str, np.ndarray] = {}
    for sid in sorted(rows):
        frames = rows[sid]
        n = len(frames)
        missing = sorted(set(range(n)) - set(frames))
        if missing:
            raise SqaLabError(
                f"sample {sid!r}: frame_idx gap at index {missing[0]} "
                f"(have {n} frames, max index {max(frames)})",
                code="features_format",
            )
        out[sid] = np.vstack([frames[t] for t in range(n)])
    return out


def write_features_csv(path, features: Mapping[str, np.ndarray]) -> None:
    atomic_write_text(path, render_features_csv(features))


def align_features(
    features: Mapping[str, np.ndarray], ids: Sequence[str], what: str = "features"
) -> list[np.ndarray]:
    """Pick matrices for ``ids`` in order, erroring on any id without one."""
    missing = sorted(set(ids) - set(features))
    if missing:
        raise SqaLabError(
            f"missing {what} for {len(missing)} sample(s): {', '.join(missing)}",
            code="missing_data",
        )
    return [np.asarray(features[i], dtype=np.float64) for i in ids]
