"""Ties-aware rank correlations and a ROUGE-L baseline.

All correlation functions take two equal-length sequences of finite reals
and return a value in [-1, 1]; results use the natural scale (callers that
want the x100 table convention scale at the reporting layer).

kendall_tau_b runs in O(n log n) via a merge-sort inversion count with
explicit tie-group corrections. Every intermediate count (total pairs,
tie pairs, discordant pairs) is an exact integer, so the final value is
bit-identical to a brute-force pair counter evaluating
(C - D) / sqrt((n0 - n1) * (n0 - n2)) on the same data.
"""

from __future__ import annotations

import math


class MetricDomainError(ValueError):
    """Inputs violate a metric's domain (length mismatch, empty, non-finite)."""


class UndefinedCorrelationError(ValueError):
    """Correlation undefined: fewer than two pairs or a constant vector."""


def _validated_pair(x, y) -> tuple[list[float], list[float]]:
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys):
        raise MetricDomainError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise UndefinedCorrelationError(f"need at least 2 pairs, got {len(xs)}")
    for values in (xs, ys):
        for v in values:
            if not math.isfinite(v):
                raise MetricDomainError("non-finite value in input")
    return xs, ys


def _tie_pair_count(sorted_values) -> int:
    """Sum of t*(t-1)/2 over runs of equal values in an already-sorted list."""
    total = 0
    run = 1
    for prev, cur in zip(sorted_values, sorted_values[1:]):
        if cur == prev:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


def _count_inversions(values: list[float]) -> int:
    """Number of pairs i < j with values[i] > values[j] (strict), by merge sort."""
    n = len(values)
    work = list(values)
    buffer = [0.0] * n
    inversions = 0
    width = 1
    while width < n:
        for start in range(0, n, 2 * width):
            mid = min(start + width, n)
            end = min(start + 2 * width, n)
            if mid == end:
                # no right half: carry the run into the buffer unchanged
                buffer[start:end] = work[start:end]
                continue
            i, j, k = start, mid, start
            while i < mid and j < end:
                if work[i] <= work[j]:
                    buffer[k] = work[i]
                    i += 1
                else:
                    buffer[k] = work[j]
                    inversions += mid - i
                    j += 1
                k += 1
            while i < mid:
                buffer[k] = work[i]
                i += 1
                k += 1
            while j < end:
                buffer[k] = work[j]
                j += 1
                k += 1
        work, buffer = buffer, work
        width *= 2
    return inversions


def kendall_tau_b(x, y) -> float:
    """Kendall rank correlation with tie corrections in both variables."""
    xs, ys = _validated_pair(x, y)
    n = len(xs)
    pairs = sorted(zip(xs, ys))
    sorted_x = [p[0] for p in pairs]
    sorted_y = [p[1] for p in pairs]

    tot = n * (n - 1) // 2
    xtie = _tie_pair_count(sorted_x)
    ytie = _tie_pair_count(sorted(ys))
    ntie = _tie_pair_count(pairs)
    if tot == xtie:
        raise UndefinedCorrelationError("first vector is constant")
    if tot == ytie:
        raise UndefinedCorrelationError("second vector is constant")

    # Sorting by (x, y) orders every x-tie group by y, so strict y-inversions
    # count exactly the discordant pairs.
    dis = _count_inversions(sorted_y)
    con_minus_dis = tot - xtie - ytie + ntie - 2 * dis
    return con_minus_dis / math.sqrt((tot - xtie) * (tot - ytie))


def midranks(values) -> list[float]:
    """1-based ranks, equal values sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def pearson_r(x, y) -> float:
    """Product-moment correlation, compensated-summation centered sums."""
    xs, ys = _validated_pair(x, y)
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    dx = [v - mean_x for v in xs]
    dy = [v - mean_y for v in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0.0:
        raise UndefinedCorrelationError("first vector is constant")
    if syy == 0.0:
        raise UndefinedCorrelationError("second vector is constant")
    return sxy / math.sqrt(sxx * syy)


def spearman_rho(x, y) -> float:
    """Pearson correlation of midranks."""
    xs, ys = _validated_pair(x, y)
    return pearson_r(midranks(xs), midranks(ys))


_EDGE_PUNCT = ".,!?;:"


def _rouge_tokens(text: str) -> list[str]:
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_EDGE_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0] * (len(b) + 1)
        for j, other in enumerate(b, start=1):
            if token == other:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] >= prev[j] else prev[j]
        prev = cur
    return prev[-1]


def rouge_l_f(reference: str, candidate: str) -> float:
    """ROUGE-L F-measure on [0, 100]: longest common subsequence of word tokens.

    Tokenization: lowercase, split on whitespace, strip edge punctuation.
    """
    ref = _rouge_tokens(reference)
    cand = _rouge_tokens(candidate)
    if not ref or not cand:
        raise MetricDomainError("empty token sequence")
    lcs = _lcs_length(ref, cand)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def aggregate_human_ratings(ratings, method: str = "mean") -> float:
    """Collapse one record's human ratings to a scalar."""
    values = [float(v) for v in ratings]
    if not values:
        raise MetricDomainError("no ratings to aggregate")
    for v in values:
        if not math.isfinite(v):
            raise MetricDomainError("non-finite rating")
    if method != "mean":
        raise MetricDomainError(f"unknown aggregation method: {method!r}")
    return math.fsum(values) / len(values)
