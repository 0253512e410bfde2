"""Opinion-score ingestion, representative values, and rating-distribution analysis.

A rating is one listener's 1..5 opinion score for one speech sample.
Everything here operates on the multiset of scores each sample received:
the plain mean opinion score (MOS), means over the N lowest or N highest
scores, two-sided trimmed means, and the per-sample moment statistics
(mean, sample standard deviation, skewness) used to study how rating
distributions are shaped across a dataset.

Skewness is the moment coefficient g1 = m3 / m2^(3/2) with population
moments (1/n denominators). Both moments are derived from exact integer
power sums of the scores before the final float divisions, so a zero
third moment is exactly 0.0, the sign of g1 is exact, and reflecting the
scores (s -> 6 - s) negates g1 exactly. No epsilon is applied when
classifying the sign. Skewness is undefined when all scores are equal.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import SqaLabError
from .ioutil import atomic_write_text, open_text

SCORE_MIN = 1
SCORE_MAX = 5

RATINGS_HEADER = ("sample_id", "listener_id", "score")
TARGETS_HEADER = ("sample_id", "value")


@dataclass(frozen=True)
class Rating:
    """One listener's opinion score for one sample."""

    sample_id: str
    listener_id: str
    score: int


@dataclass(frozen=True)
class SampleRatings:
    """All scores one sample received, ascending, with aligned listener ids.

    Ties in score are ordered by listener id so the alignment is stable
    regardless of input order.
    """

    sample_id: str
    scores: tuple[int, ...]
    listeners: tuple[str, ...]

    def __post_init__(self):
        if len(self.scores) == 0:
            raise SqaLabError(
                f"sample {self.sample_id!r} has no ratings", code="ratings_format"
            )
        if len(self.scores) != len(self.listeners):
            raise SqaLabError(
                f"sample {self.sample_id!r}: {len(self.scores)} scores vs "
                f"{len(self.listeners)} listeners",
                code="ratings_format",
            )
        if any(s < SCORE_MIN or s > SCORE_MAX for s in self.scores):
            raise SqaLabError(
                f"sample {self.sample_id!r}: score outside {SCORE_MIN}..{SCORE_MAX}",
                code="score_invalid",
            )
        if any(a > b for a, b in zip(self.scores, self.scores[1:])):
            raise SqaLabError(
                f"sample {self.sample_id!r}: scores not ascending", code="ratings_format"
            )

    @classmethod
    def from_pairs(cls, sample_id: str, pairs: Iterable[tuple[str, int]]) -> "SampleRatings":
        """Build from (listener_id, score) pairs in any order."""
        ordered = sorted(pairs, key=lambda p: (p[1], p[0]))
        return cls(
            sample_id=sample_id,
            scores=tuple(int(p[1]) for p in ordered),
            listeners=tuple(p[0] for p in ordered),
        )

    @property
    def n_all(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class Dataset:
    """A collection of rated samples plus the set of listeners who rated them."""

    samples: Mapping[str, SampleRatings]
    listeners: frozenset[str]

    @classmethod
    def from_ratings(cls, ratings: Iterable[Rating]) -> "Dataset":
        by_sample: dict[str, list[tuple[str, int]]] = {}
        seen: set[tuple[str, str]] = set()
        for r in ratings:
            key = (r.sample_id, r.listener_id)
            if key in seen:
                raise SqaLabError(
                    f"duplicate rating for sample {r.sample_id!r} by listener "
                    f"{r.listener_id!r}",
                    code="duplicate_rating",
                )
            seen.add(key)
            by_sample.setdefault(r.sample_id, []).append((r.listener_id, r.score))
        samples = {
            sid: SampleRatings.from_pairs(sid, pairs) for sid, pairs in by_sample.items()
        }
        listeners = frozenset(l for s in samples.values() for l in s.listeners)
        return cls(samples=samples, listeners=listeners)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def summary(self) -> "DatasetSummary":
        per_sample = Counter(s.n_all for s in self.samples.values())
        return DatasetSummary(
            n_samples=len(self.samples),
            n_listeners=len(self.listeners),
            ratings_per_sample=dict(sorted(per_sample.items())),
        )


@dataclass(frozen=True)
class DatasetSummary:
    n_samples: int
    n_listeners: int
    ratings_per_sample: dict[int, int]


REPVAL_KINDS = ("mos", "n_low", "n_high", "central")


@dataclass(frozen=True)
class RepValSpec:
    """Which representative value to compute, with its parameters.

    kind "mos" takes no parameters, "n_low"/"n_high" take ``n``, and
    "central" takes ``n_low_trim``/``n_high_trim``.
    """

    kind: str
    n: int | None = None
    n_low_trim: int | None = None
    n_high_trim: int | None = None

    def __post_init__(self):
        if self.kind not in REPVAL_KINDS:
            raise SqaLabError(
                f"unknown representative value kind {self.kind!r} "
                f"(expected one of {', '.join(REPVAL_KINDS)})",
                code="repval_spec",
            )
        needs_n = self.kind in ("n_low", "n_high")
        needs_trims = self.kind == "central"
        if needs_n:
            if self.n is None or self.n < 1:
                raise SqaLabError(f"kind {self.kind!r} requires n >= 1", code="repval_spec")
        elif self.n is not None:
            raise SqaLabError(f"kind {self.kind!r} takes no n", code="repval_spec")
        if needs_trims:
            if (
                self.n_low_trim is None
                or self.n_high_trim is None
                or self.n_low_trim < 0
                or self.n_high_trim < 0
            ):
                raise SqaLabError(
                    "kind 'central' requires nonnegative n_low_trim and n_high_trim",
                    code="repval_spec",
                )
        elif self.n_low_trim is not None or self.n_high_trim is not None:
            raise SqaLabError(f"kind {self.kind!r} takes no trims", code="repval_spec")

    def valid_for(self, n_all: int) -> bool:
        """Whether this spec can be evaluated on a sample with ``n_all`` ratings."""
        if self.kind in ("n_low", "n_high"):
            return 1 <= self.n <= n_all
        if self.kind == "central":
            return self.n_low_trim + self.n_high_trim <= n_all - 1
        return True

    def describe(self) -> str:
        if self.kind in ("n_low", "n_high"):
            return f"{self.kind}(n={self.n})"
        if self.kind == "central":
            return f"central(trim_low={self.n_low_trim}, trim_high={self.n_high_trim})"
        return "mos"


@dataclass(frozen=True)
class SampleStats:
    """Per-sample mean, sample standard deviation, and skewness.

    ``skewness`` is None when undefined (all scores equal, zero variance).
    ``sample_std`` uses the n-1 denominator and is 0.0 for a single rating.
    """

    mean: float
    sample_std: float
    skewness: float | None


@dataclass(frozen=True)
class SkewSignCounts:
    positive: int
    negative: int
    zero: int
    undefined: int

    @property
    def total(self) -> int:
        return self.positive + self.negative + self.zero + self.undefined


# ---------------------------------------------------------------------------
# Representative values
# ---------------------------------------------------------------------------


def mos(sample: SampleRatings) -> float:
    """Arithmetic mean of all scores."""
    return sum(sample.scores) / sample.n_all


def n_low_mos(sample: SampleRatings, n: int) -> float:
    """Mean of the n smallest scores; n=1 is the minimum, n=n_all the MOS."""
    _check_n(sample, n)
    return sum(sample.scores[:n]) / n


def n_high_mos(sample: SampleRatings, n: int) -> float:
    """Mean of the n largest scores; n=1 is the maximum, n=n_all the MOS."""
    _check_n(sample, n)
    return sum(sample.scores[-n:]) / n


def central_mos(sample: SampleRatings, n_low_trim: int, n_high_trim: int) -> float:
    """Mean after dropping the n_low_trim smallest and n_high_trim largest scores."""
    if n_low_trim < 0 or n_high_trim < 0:
        raise SqaLabError("trims must be nonnegative", code="repval_spec")
    kept = sample.n_all - n_low_trim - n_high_trim
    if kept < 1:
        raise SqaLabError(
            f"sample {sample.sample_id!r}: trims ({n_low_trim}, {n_high_trim}) exhaust "
            f"all {sample.n_all} ratings",
            code="repval_range",
        )
    window = sample.scores[n_low_trim : sample.n_all - n_high_trim]
    return sum(window) / kept


def _check_n(sample: SampleRatings, n: int) -> None:
    if not 1 <= n <= sample.n_all:
        raise SqaLabError(
            f"sample {sample.sample_id!r}: n={n} outside 1..{sample.n_all} "
            f"(sample has {sample.n_all} ratings)",
            code="repval_range",
        )


def repval(sample: SampleRatings, spec: RepValSpec) -> float:
    """Evaluate one representative value on one sample."""
    if spec.kind == "mos":
        return mos(sample)
    if spec.kind == "n_low":
        return n_low_mos(sample, spec.n)
    if spec.kind == "n_high":
        return n_high_mos(sample, spec.n)
    return central_mos(sample, spec.n_low_trim, spec.n_high_trim)


def repval_batch(dataset: Dataset, spec: RepValSpec) -> dict[str, float]:
    """One value per sample; fails whole (no partial output) if any sample
    has too few ratings for the requested value, listing the offending ids."""
    bad = sorted(
        sid for sid, s in dataset.samples.items() if not spec.valid_for(s.n_all)
    )
    if bad:
        raise SqaLabError(
            f"{spec.describe()} not applicable to {len(bad)} sample(s): "
            + ", ".join(bad),
            code="repval_range",
        )
    return {sid: repval(dataset.samples[sid], spec) for sid in sorted(dataset.samples)}


# ---------------------------------------------------------------------------
# Distribution statistics
# ---------------------------------------------------------------------------


def sample_stats(sample: SampleRatings, adjusted: bool = False) -> SampleStats:
    """Mean, sample std (n-1 denominator), and skewness of one sample's scores.

    ``adjusted=True`` applies the small-sample correction
    sqrt(n(n-1))/(n-2) to g1 (undefined for n < 3); the sign never
    changes, only the magnitude.
    """
    n = sample.n_all
    s1 = sum(sample.scores)
    mean = s1 / n
    if n == 1:
        return SampleStats(mean=mean, sample_std=0.0, skewness=None)
    s2 = sum(x * x for x in sample.scores)
    var_num = n * s2 - s1 * s1  # n^2 * m2, exact integer
    sample_std = math.sqrt(var_num / (n * (n - 1)))
    if var_num == 0:
        return SampleStats(mean=mean, sample_std=0.0, skewness=None)
    s3 = sum(x * x * x for x in sample.scores)
    m3_num = n * n * s3 - 3 * n * s1 * s2 + 2 * s1 * s1 * s1  # n^3 * m3, exact integer
    # g1 = m3 / m2^(3/2); the n powers cancel: g1 = m3_num / var_num^(3/2)
    g1 = m3_num / var_num**1.5
    if adjusted:
        if n < 3:
            return SampleStats(mean=mean, sample_std=sample_std, skewness=None)
        g1 *= math.sqrt(n * (n - 1)) / (n - 2)
    return SampleStats(mean=mean, sample_std=sample_std, skewness=g1)


def dataset_stats(dataset: Dataset, adjusted: bool = False) -> dict[str, SampleStats]:
    return {
        sid: sample_stats(dataset.samples[sid], adjusted=adjusted)
        for sid in sorted(dataset.samples)
    }


def skew_sign_counts(dataset: Dataset, adjusted: bool = False) -> SkewSignCounts:
    """How many samples have positive / negative / exactly-zero / undefined skewness."""
    pos = neg = zero = undef = 0
    for s in dataset.samples.values():
        g1 = sample_stats(s, adjusted=adjusted).skewness
        if g1 is None:
            undef += 1
        elif g1 > 0:
            pos += 1
        elif g1 < 0:
            neg += 1
        else:
            zero += 1
    return SkewSignCounts(positive=pos, negative=neg, zero=zero, undefined=undef)


@dataclass(frozen=True)
class Histogram:
    """Fixed-width histogram over [range_min, range_max) with half-open bins.

    Values below range_min land in ``underflow``; values at or above
    range_max land in ``overflow``. Counts always sum to the input length.
    """

    range_min: float
    range_max: float
    bin_width: float
    counts: tuple[int, ...]
    underflow: int
    overflow: int

    def bin_starts(self) -> list[float]:
        return [self.range_min + k * self.bin_width for k in range(len(self.counts))]

    def items(self) -> list[tuple[float, int]]:
        return list(zip(self.bin_starts(), self.counts))

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow


def histogram(
    values: Sequence[float], bin_width: float, range_min: float, range_max: float
) -> Histogram:
    """Bin values into half-open bins [start, start+width) from range_min."""
    if bin_width <= 0:
        raise SqaLabError(f"bin_width must be > 0, got {bin_width}", code="histogram_input")
    if not range_min < range_max:
        raise SqaLabError(
            f"range_min {range_min} must be < range_max {range_max}",
            code="histogram_input",
        )
    span = range_max - range_min
    n_bins = int(math.ceil(span / bin_width - 1e-9))
    counts = [0] * n_bins
    underflow = overflow = 0
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise SqaLabError(f"non-finite value {v!r} in histogram input", code="histogram_input")
        if v < range_min:
            underflow += 1
        elif v >= range_max:
            overflow += 1
        else:
            idx = int((v - range_min) / bin_width)
            if idx >= n_bins:  # float dust at a bin edge
                idx = n_bins - 1
            counts[idx] += 1
    return Histogram(
        range_min=range_min,
        range_max=range_max,
        bin_width=bin_width,
        counts=tuple(counts),
        underflow=underflow,
        overflow=overflow,
    )


def extreme_usage_proportions(dataset: Dataset, which: str = "low") -> dict[str, float]:
    """Per listener: fraction of their ratings that sit at their sample's
    minimum ("low") or maximum ("high"). Every rating tied with the
    extremum counts, so two listeners who both gave the sample minimum
    both count it.
    """
    if which not in ("low", "high"):
        raise SqaLabError(f"which must be 'low' or 'high', got {which!r}", code="invalid_input")
    hits: Counter[str] = Counter()
    totals: Counter[str] = Counter()
    for s in dataset.samples.values():
        extremum = s.scores[0] if which == "low" else s.scores[-1]
        for listener, score in zip(s.listeners, s.scores):
            totals[listener] += 1
            if score == extremum:
                hits[listener] += 1
    return {listener: hits[listener] / totals[listener] for listener in sorted(totals)}


# ---------------------------------------------------------------------------
# File formats owned by this module
# ---------------------------------------------------------------------------


def ingest_ratings(source) -> Dataset:
    """Read a ratings CSV (header ``sample_id,listener_id,score``) into a Dataset.

    Rejects empty files, malformed rows, out-of-range or non-integer
    scores (naming the offending line), and duplicate
    (sample, listener) pairs.
    """
    ratings: list[Rating] = []
    with open_text(source) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SqaLabError("empty ratings file (missing header)", code="ratings_format")
        if tuple(h.strip() for h in header) != RATINGS_HEADER:
            raise SqaLabError(
                f"bad ratings header {header!r}, expected {','.join(RATINGS_HEADER)}",
                code="ratings_format",
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise SqaLabError(
                    f"line {line}: expected 3 fields, got {len(row)}", code="ratings_format"
                )
            sample_id, listener_id, raw_score = (field.strip() for field in row)
            if not sample_id or not listener_id:
                raise SqaLabError(
                    f"line {line}: empty sample_id or listener_id", code="ratings_format"
                )
            try:
                score = int(raw_score)
            except ValueError:
                raise SqaLabError(
                    f"line {line}: score {raw_score!r} is not an integer",
                    code="score_invalid",
                ) from None
            if not SCORE_MIN <= score <= SCORE_MAX:
                raise SqaLabError(
                    f"line {line}: score {score} outside {SCORE_MIN}..{SCORE_MAX}",
                    code="score_invalid",
                )
            ratings.append(Rating(sample_id, listener_id, score))
    if not ratings:
        raise SqaLabError("ratings file has no rating rows", code="ratings_format")
    return Dataset.from_ratings(ratings)


def render_ratings_csv(dataset: Dataset) -> str:
    lines = [",".join(RATINGS_HEADER)]
    for sid in sorted(dataset.samples):
        s = dataset.samples[sid]
        for listener, score in sorted(zip(s.listeners, s.scores)):
            lines.append(f"{sid},{listener},{score}")
    return "\n".join(lines) + "\n"


def render_repvals_csv(values: Mapping[str, float]) -> str:
    lines = [",".join(TARGETS_HEADER)]
    for sid in sorted(values):
        lines.append(f"{sid},{values[sid]:.6f}")
    return "\n".join(lines) + "\n"


def read_targets_csv(source) -> dict[str, float]:
    """Read a targets CSV (header ``sample_id,value``) into a mapping."""
    out: dict[str, float] = {}
    with open_text(source) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TARGETS_HEADER:
            raise SqaLabError(
                f"bad targets header {header!r}, expected {','.join(TARGETS_HEADER)}",
                code="targets_format",
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise SqaLabError(
                    f"line {line}: expected 2 fields, got {len(row)}", code="targets_format"
                )
            sid = row[0].strip()
            try:
                value = float(row[1])
            except ValueError:
                raise SqaLabError(
                    f"line {line}: value {row[1]!r} is not a number", code="targets_format"
                ) from None
            if not math.isfinite(value):
                raise SqaLabError(f"line {line}: non-finite value", code="targets_format")
            if sid in out:
                raise SqaLabError(
                    f"line {line}: duplicate sample_id {sid!r}", code="targets_format"
                )
            out[sid] = value
    if not out:
        raise SqaLabError("targets file has no rows", code="targets_format")
    return out


def render_stats_tsv(stats: Mapping[str, SampleStats]) -> str:
    lines = ["sample_id\tmean\tsample_std\tskewness"]
    for sid in sorted(stats):
        st = stats[sid]
        skew = "NA" if st.skewness is None else f"{st.skewness:.6f}"
        lines.append(f"{sid}\t{st.mean:.6f}\t{st.sample_std:.6f}\t{skew}")
    return "\n".join(lines) + "\n"


def render_skew_counts_tsv(counts: SkewSignCounts) -> str:
    return (
        "sign\tcount\n"
        f"positive\t{counts.positive}\n"
        f"negative\t{counts.negative}\n"
        f"zero\t{counts.zero}\n"
        f"undefined\t{counts.undefined}\n"
    )


def render_histogram_tsv(hist: Histogram) -> str:
    lines = ["bin_start\tcount", f"underflow\t{hist.underflow}"]
    for start, count in hist.items():
        lines.append(f"{start:.6g}\t{count}")
    lines.append(f"overflow\t{hist.overflow}")
    return "\n".join(lines) + "\n"


def render_summary_tsv(summary: DatasetSummary) -> str:
    lines = [
        "key\tvalue",
        f"samples\t{summary.n_samples}",
        f"listeners\t{summary.n_listeners}",
    ]
    for k, count in summary.ratings_per_sample.items():
        lines.append(f"ratings_per_sample_{k}\t{count}")
    return "\n".join(lines) + "\n"


def render_proportions_tsv(proportions: Mapping[str, float]) -> str:
    lines = ["listener_id\tproportion"]
    for listener in sorted(proportions):
        lines.append(f"{listener}\t{proportions[listener]:.6f}")
    return "\n".join(lines) + "\n"


def write_ratings_csv(path, dataset: Dataset) -> None:
    atomic_write_text(path, render_ratings_csv(dataset))


def write_repvals_csv(path, values: Mapping[str, float]) -> None:
    atomic_write_text(path, render_repvals_csv(values))
