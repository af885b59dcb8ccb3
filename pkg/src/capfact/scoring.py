"""Deterministic quality scoring for corrupted captions.

A corrupted caption is scored by the fraction of its factual elements
(objects and actions) left intact: ``1 - replaced / total``. The real
score is then binned onto the 1..5 label scale used for training data.
"""

from __future__ import annotations

import math


class UndefinedScoreError(ValueError):
    """Raised when a caption has no factual elements to score against."""


class ScoreDomainError(ValueError):
    """Raised for arguments outside the scoring domain."""


def quality_score(n_elements: int, n_replaced: int) -> float:
    """Fraction of factual elements left intact, in [0, 1].

    ``n_elements`` counts all extracted objects and actions;
    ``n_replaced`` counts how many of them were swapped out.
    """
    if n_elements < 1:
        raise UndefinedScoreError("caption has no factual elements; score is undefined")
    if not 0 <= n_replaced <= n_elements:
        raise ScoreDomainError(
            f"n_replaced must be within [0, {n_elements}], got {n_replaced}"
        )
    return 1.0 - n_replaced / n_elements


def score_to_label(score: float) -> int:
    """Bin a [0, 1] quality score onto the integer 1..5 scale.

    Uses 1 + round(4 * score) with ties at .5 rounding half-up, which is
    monotone, covers every label, and maps 0.0 -> 1 and 1.0 -> 5.
    """
    if not 0.0 <= score <= 1.0:
        raise ScoreDomainError(f"score must be within [0, 1], got {score}")
    return 1 + math.floor(4.0 * score + 0.5)
