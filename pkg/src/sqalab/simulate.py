"""Synthetic rating generator: listeners score the worst segment they notice.

Each sample is a short sequence of segments with latent qualities drawn
uniformly from [1, 5]. A listener inspects every segment but overlooks
each one independently with probability ``overlook_prob``; their score
is the minimum quality among the segments they did notice (falling back
to the sample's mean quality in the rare case they overlooked all of
them), plus Gaussian noise, rounded half-up and clamped to 1..5.
Overlooking can only remove candidates from the minimum, so it can only
raise a score, which leans the per-sample rating distributions toward
positive skew.

Frame features are emitted alongside the ratings: feature 0 tracks the
per-segment quality with additive noise, the remaining features are pure
unit-variance noise. Each sample draws from an independent RNG stream
derived from (seed, sample index), in the fixed order segment-count,
qualities, listeners (overlook draws then score noise), then the feature
noise block, so output is reproducible and per-sample generation could
be parallelized without changing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SqaLabError
from .ioutil import atomic_write_text
from .ratings import Dataset, Rating


@dataclass(frozen=True)
class SimConfig:
    n_samples: int
    listeners_per_sample: int = 8
    segments_min: int = 3
    segments_max: int = 10
    overlook_prob: float = 0.3
    score_noise_sigma: float = 0.5
    frames_per_segment: int = 8
    feature_dim: int = 8
    feature_noise_sigma: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise SqaLabError("n_samples must be >= 1", code="sim_config")
        if self.listeners_per_sample < 1:
            raise SqaLabError("listeners_per_sample must be >= 1", code="sim_config")
        if not 1 <= self.segments_min <= self.segments_max:
            raise SqaLabError(
                f"segment range ({self.segments_min}, {self.segments_max}) invalid",
                code="sim_config",
            )
        if not 0.0 <= self.overlook_prob < 1.0:
            raise SqaLabError("overlook_prob must be in [0, 1)", code="sim_config")
        if self.score_noise_sigma < 0 or self.feature_noise_sigma < 0:
            raise SqaLabError("noise sigmas must be >= 0", code="sim_config")
        if self.frames_per_segment < 1 or self.feature_dim < 1:
            raise SqaLabError(
                "frames_per_segment and feature_dim must be >= 1", code="sim_config"
            )
        if not 0 <= self.seed < 2**64:
            raise SqaLabError("seed must be a nonnegative 64-bit integer", code="sim_config")


@dataclass(frozen=True)
class SyntheticTruth:
    """Latent per-segment qualities behind one sample's ratings."""

    sample_id: str
    qualities: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.qualities)

    @property
    def min_quality(self) -> float:
        return min(self.qualities)

    @property
    def mean_quality(self) -> float:
        return sum(self.qualities) / len(self.qualities)


@dataclass(frozen=True)
class SimResult:
    dataset: Dataset
    truths: tuple[SyntheticTruth, ...]
    features: dict[str, np.ndarray]


def listener_score(
    qualities: Sequence[float], overlook_prob: float, noise_sigma: float, rng
) -> int:
    """One listener's 1..5 score for a sample with the given segment qualities.

    Consumes exactly len(qualities) uniform draws (overlook decisions)
    plus one normal draw (score noise) from ``rng``, so streams stay
    aligned across parameter settings.
    """
    z = np.asarray(qualities, dtype=np.float64)
    if z.size < 1:
        raise SqaLabError("need at least one segment quality", code="sim_config")
    noticed = rng.random(z.size) >= overlook_prob
    base = float(z[noticed].min()) if noticed.any() else float(z.mean())
    raw = base + noise_sigma * float(rng.standard_normal())
    return int(min(5, max(1, math.floor(raw + 0.5))))


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Independent per-sample stream derived from (seed, sample index)."""
    return np.random.default_rng((seed, sample_index))


def simulate(config: SimConfig) -> SimResult:
    """Generate ratings, latent truths, and aligned frame features."""
    listener_ids = [f"l{j:03d}" for j in range(config.listeners_per_sample)]
    all_ratings: list[Rating] = []
    truths: list[SyntheticTruth] = []
    features: dict[str, np.ndarray] = {}
    for i in range(config.n_samples):
        sid = f"s{i:06d}"
        rng = sample_rng(config.seed, i)
        k = int(rng.integers(config.segments_min, config.segments_max + 1))
        z = rng.uniform(1.0, 5.0, k)
        for lid in listener_ids:
            score = listener_score(z, config.overlook_prob, config.score_noise_sigma, rng)
            all_ratings.append(Rating(sid, lid, score))
        m = rng.standard_normal((k * config.frames_per_segment, config.feature_dim))
        m[:, 0] = (
            np.repeat(z, config.frames_per_segment)
            + config.feature_noise_sigma * m[:, 0]
        )
        features[sid] = m
        truths.append(SyntheticTruth(sid, tuple(float(q) for q in z)))
    return SimResult(
        dataset=Dataset.from_ratings(all_ratings),
        truths=tuple(truths),
        features=features,
    )


def render_truth_tsv(truths: Sequence[SyntheticTruth]) -> str:
    lines = ["sample_id\tK\tmin_quality\tmean_quality"]
    for t in sorted(truths, key=lambda t: t.sample_id):
        lines.append(f"{t.sample_id}\t{t.k}\t{t.min_quality:.6f}\t{t.mean_quality:.6f}")
    return "\n".join(lines) + "\n"


def write_truth_tsv(path, truths: Sequence[SyntheticTruth]) -> None:
    atomic_write_text(path, render_truth_tsv(truths))
