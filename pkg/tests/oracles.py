"""Independent brute-force references shared by the tests.

These deliberately avoid the library's own code paths: representative
values via Fraction arithmetic on sorted copies, ranks by counting, and
moments straight from their textbook definitions.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations_with_replacement


def all_score_multisets(max_size: int, scores=(1, 2, 3, 4, 5)):
    """Every multiset of scores with size 1..max_size, as sorted tuples."""
    for size in range(1, max_size + 1):
        yield from combinations_with_replacement(scores, size)


def mos_oracle(scores) -> Fraction:
    return Fraction(sum(scores), len(scores))


def n_low_oracle(scores, n: int) -> Fraction:
    picked = sorted(scores)[:n]
    return Fraction(sum(picked), n)


def n_high_oracle(scores, n: int) -> Fraction:
    picked = sorted(scores)[-n:]
    return Fraction(sum(picked), n)


def central_oracle(scores, trim_low: int, trim_high: int) -> Fraction:
    s = sorted(scores)
    kept = s[trim_low:len(s) - trim_high] if trim_high else s[trim_low:]
    return Fraction(sum(kept), len(kept))


def median_oracle(scores) -> Fraction:
    s = sorted(scores)
    n = len(s)
    if n % 2:
        return Fraction(s[n // 2])
    return Fraction(s[n // 2 - 1] + s[n // 2], 2)


def skewness_oracle(scores) -> float | None:
    """g1 = m3 / m2^1.5 with population moments, straight float evaluation."""
    n = len(scores)
    mean = sum(scores) / n
    m2 = sum((x - mean) ** 2 for x in scores) / n
    if m2 == 0:
        return None
    m3 = sum((x - mean) ** 3 for x in scores) / n
    return m3 / m2**1.5


def std_oracle(scores) -> float:
    n = len(scores)
    if n == 1:
        return 0.0
    mean = sum(scores) / n
    return math.sqrt(sum((x - mean) ** 2 for x in scores) / (n - 1))


def average_rank_oracle(values) -> list[float]:
    """Rank of v = (# strictly smaller) + (# equal + 1) / 2, 1-based."""
    out = []
    for v in values:
        less = sum(1 for x in values if x < v)
        equal = sum(1 for x in values if x == v)
        out.append(less + (equal + 1) / 2)
    return out


def pearson_oracle(xs, ys) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    return cov / math.sqrt(vx * vy)
