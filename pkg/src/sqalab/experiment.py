"""Dataset splitting, single training runs, and multi-trial evaluation.

A trial is one train-and-evaluate pass; trials differ only in the
sub-seed derived from (master seed, trial index), which drives parameter
initialization, batch shuffling, and dropout. Reports aggregate the
per-trial test metrics as mean and sample standard deviation.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SqaLabError
from .estimator import FramePoolRegressor
from .ioutil import atomic_write_text, open_text
from .metrics import METRIC_NAMES, MetricSummary, aggregate_trials, evaluate
from .ratings import RepValSpec

PARTITIONS = ("train", "validation", "test")


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for part, ids in zip(PARTITIONS, (self.train, self.validation, self.test)):
            if not ids:
                raise SqaLabError(f"{part} partition is empty", code="split_format")
            overlap = seen & set(ids)
            # the test partition may alias validation (two-way splits)
            if overlap and not (part == "test" and tuple(ids) == tuple(self.validation)):
                raise SqaLabError(
                    f"ids appear in more than one partition: "
                    f"{', '.join(sorted(overlap)[:5])}",
                    code="split_format",
                )
            seen |= set(ids)


def split_ids(ids: Sequence[str], fractions: Sequence[float], seed) -> Split:
    """Seeded shuffle then contiguous cut into train/validation/test.

    All but the last partition get floor(fraction * n) ids (with a tiny
    epsilon so exact rational fractions land on their integer); the last
    gets the remainder. Two fractions make a train/validation split whose
    validation part doubles as the test set.
    """
    ids = sorted(ids)
    if not ids:
        raise SqaLabError("cannot split an empty id list", code="split_format")
    fracs = [float(f) for f in fractions]
    if len(fracs) not in (2, 3):
        raise SqaLabError("fractions must have 2 or 3 entries", code="split_format")
    if any(f <= 0 for f in fracs):
        raise SqaLabError("fractions must be positive", code="split_format")
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise SqaLabError(f"fractions must sum to 1, got {sum(fracs)!r}",
                          code="split_format")
    n = len(ids)
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(n)]
    sizes = [int(f * n + 1e-9) for f in fracs[:-1]]
    sizes.append(n - sum(sizes))
    if any(s < 1 for s in sizes):
        raise SqaLabError(f"fractions {fracs} leave an empty partition for n={n}",
                          code="split_format")
    parts = []
    start = 0
    for s in sizes:
        parts.append(tuple(order[start:start + s]))
        start += s
    if len(parts) == 2:
        return Split(train=parts[0], validation=parts[1], test=parts[1])
    return Split(train=parts[0], validation=parts[1], test=parts[2])


def read_fixed_split(source) -> Split:
    """TSV `sample_id\\tpartition` with partitions train/validation/test.

    The test rows may be omitted; the validation set then doubles as the
    test set.
    """
    with open_text(source) as fh:
        lines = [line.rstrip("\r\n") for line in fh]
    if not lines or lines[0] != "sample_id\tpartition":
        raise SqaLabError("expected header 'sample_id\\tpartition'",
                          code="split_format")
    buckets: dict[str, list[str]] = {p: [] for p in PARTITIONS}
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise SqaLabError(f"line {lineno}: expected 2 tab-separated fields",
                              code="split_format")
        sid, part = parts
        if part not in buckets:
            raise SqaLabError(
                f"line {lineno}: unknown partition {part!r} "
                f"(expected one of {', '.join(PARTITIONS)})",
                code="split_format",
            )
        if sid in seen:
            raise SqaLabError(f"line {lineno}: duplicate sample id {sid!r}",
                              code="split_format")
        seen.add(sid)
        buckets[part].append(sid)
    if not buckets["test"]:
        buckets["test"] = list(buckets["validation"])
    return Split(train=tuple(buckets["train"]),
                 validation=tuple(buckets["validation"]),
                 test=tuple(buckets["test"]))


def render_split_tsv(split: Split) -> str:
    lines = ["sample_id\tpartition"]
    shown = [("train", split.train), ("validation", split.validation)]
    if split.test != split.validation:
        shown.append(("test", split.test))
    for part, ids in shown:
        for sid in ids:
            lines.append(f"{sid}\t{part}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrainConfig:
    target_spec: RepValSpec
    alpha: float = 1.0
    learning_rate: float = 1e-4
    batch_size: int = 32
    patience: int = 5
    max_epochs: int = 200
    hidden_width: int = 0
    dropout_rate: float = 0.0
    trials: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise SqaLabError("trials must be >= 1", code="train_config")
        self.make_regressor(0)._check_config()

    def make_regressor(self, random_state) -> FramePoolRegressor:
        return FramePoolRegressor(
            hidden_width=self.hidden_width,
            alpha=self.alpha,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            patience=self.patience,
            max_epochs=self.max_epochs,
            dropout_rate=self.dropout_rate,
            random_state=random_state,
        )


def trial_seed(seed: int, trial_index: int) -> np.random.SeedSequence:
    """Independent deterministic stream for one trial of a master seed."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(trial_index,))


def _gather(features: Mapping[str, np.ndarray], targets: Mapping[str, float],
            ids: Sequence[str]) -> tuple[list[np.ndarray], list[float]]:
    missing = sorted(i for i in ids if i not in features or i not in targets)
    if missing:
        raise SqaLabError(
            "missing features or target for sample ids: " + ", ".join(missing[:10])
            + ("" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"),
            code="missing_data",
        )
    return [features[i] for i in ids], [float(targets[i]) for i in ids]


def train_model(
    features: Mapping[str, np.ndarray],
    targets: Mapping[str, float],
    split: Split,
    config: TrainConfig,
    random_state=None,
) -> FramePoolRegressor:
    """Fit one regressor on the split's train set, early-stopped on validation."""
    x_train, y_train = _gather(features, targets, split.train)
    x_val, y_val = _gather(features, targets, split.validation)
    reg = config.make_regressor(
        trial_seed(config.seed, 0) if random_state is None else random_state
    )
    reg.fit(x_train, y_train, X_val=x_val, y_val=y_val)
    return reg


def predict_by_id(reg: FramePoolRegressor,
                  features: Mapping[str, np.ndarray],
                  ids: Sequence[str] | None = None) -> dict[str, float]:
    wanted = sorted(features) if ids is None else list(ids)
    missing = sorted(i for i in wanted if i not in features)
    if missing:
        raise SqaLabError("missing features for sample ids: " + ", ".join(missing[:10]),
                          code="missing_data")
    values = reg.predict([features[i] for i in wanted])
    return {i: float(v) for i, v in zip(wanted, values)}


def evaluate_model(reg: FramePoolRegressor,
                   features: Mapping[str, np.ndarray],
                   targets: Mapping[str, float],
                   ids: Sequence[str]) -> dict[str, float]:
    preds = predict_by_id(reg, features, ids)
    wanted = {i: float(targets[i]) for i in ids if i in targets}
    return evaluate(wanted, preds)


@dataclass(frozen=True)
class TrialReport:
    trials: int
    per_trial: tuple[dict[str, float], ...]
    summaries: dict[str, MetricSummary] = field(default_factory=dict)

    def metric_values(self, name: str) -> list[float]:
        return [t[name] for t in self.per_trial]


def run_trials(
    features: Mapping[str, np.ndarray],
    targets: Mapping[str, float],
    split: Split,
    config: TrainConfig,
    n_jobs: int = 1,
) -> TrialReport:
    """Train and evaluate config.trials times; aggregate test metrics.

    Trials are independent; n_jobs > 1 runs them on a thread pool. The
    report is identical either way because results are keyed by trial
    index before aggregation.
    """
    if n_jobs < 1:
        raise SqaLabError("n_jobs must be >= 1", code="train_config")

    def one(t: int) -> dict[str, float]:
        reg = train_model(features, targets, split, config,
                          random_state=trial_seed(config.seed, t))
        return evaluate_model(reg, features, targets, split.test)

    if n_jobs == 1 or config.trials == 1:
        results = [one(t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=min(n_jobs, config.trials)) as pool:
            results = list(pool.map(one, range(config.trials)))
    summaries = {}
    if config.trials >= 2:
        summaries = {name: aggregate_trials([r[name] for r in results])
                     for name in METRIC_NAMES}
    return TrialReport(trials=config.trials, per_trial=tuple(results),
                       summaries=summaries)


def thread_budget(default: int = 1) -> int:
    """Worker cap from SQA_LAB_THREADS; unset or invalid means `default`."""
    raw = os.environ.get("SQA_LAB_THREADS", "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise SqaLabError(f"SQA_LAB_THREADS must be an integer, got {raw!r}",
                          code="train_config") from None
    if value < 1:
        raise SqaLabError("SQA_LAB_THREADS must be >= 1", code="train_config")
    return value


def render_trials_report_tsv(report: TrialReport) -> str:
    if report.trials == 1:
        lines = ["metric\tvalue"]
        only = report.per_trial[0]
        for name in METRIC_NAMES:
            lines.append(f"{name}\t{only[name]:.6f}")
    else:
        lines = ["metric\tmean\tstd"]
        for name in METRIC_NAMES:
            s = report.summaries[name]
            lines.append(f"{name}\t{s.mean:.6f}\t{s.std:.6f}")
    return "\n".join(lines) + "\n"


def render_trials_report_json(report: TrialReport) -> str:
    payload: dict = {"trials": report.trials, "metrics": {}}
    for name in METRIC_NAMES:
        entry: dict = {"values": [round(v, 6) for v in report.metric_values(name)]}
        if report.summaries:
            entry["mean"] = round(report.summaries[name].mean, 6)
            entry["std"] = round(report.summaries[name].std, 6)
        payload["metrics"][name] = entry
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_trials_report(path, report: TrialReport, fmt: str = "tsv") -> None:
    if fmt == "tsv":
        atomic_write_text(path, render_trials_report_tsv(report))
    elif fmt == "json":
        atomic_write_text(path, render_trials_report_json(report))
    else:
        raise SqaLabError(f"unknown report format {fmt!r}", code="format")
