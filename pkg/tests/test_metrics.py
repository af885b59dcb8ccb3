import math
import random

import numpy as np
import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from capfact.metrics import (
    MetricDomainError,
    UndefinedCorrelationError,
    aggregate_human_ratings,
    kendall_tau_b,
    midranks,
    pearson_r,
    rouge_l_f,
    spearman_rho,
)


def tau_oracle(x, y):
    """Brute-force pair counting; the reference kendall_tau_b must match exactly."""
    n = len(x)
    C = D = 0
    n0 = n * (n - 1) // 2
    n1 = n2 = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0:
                n1 += 1
            if dy == 0:
                n2 += 1
            if dx * dy > 0:
                C += 1
            elif dx * dy < 0:
                D += 1
    if n0 == n1 or n0 == n2:
        raise UndefinedCorrelationError("constant vector")
    return (C - D) / math.sqrt((n0 - n1) * (n0 - n2))


def test_tau_perfect_agreement_and_reversal():
    assert kendall_tau_b([1, 2, 3], [10, 20, 30]) == 1.0
    assert kendall_tau_b([1, 2, 3], [3, 2, 1]) == -1.0


def test_tau_recorded_tie_case():
    # hand-checked by pair counting: C=4, D=0, one tie pair per vector
    assert kendall_tau_b([1, 1, 2, 3], [1, 2, 2, 3]) == 0.8
    assert tau_oracle([1, 1, 2, 3], [1, 2, 2, 3]) == 0.8


def test_tau_matches_oracle_on_seeded_vectors():
    rng = random.Random(20240814)
    checked = 0
    while checked < 1000:
        n = rng.randint(2, 12)
        x = [rng.randint(1, 4) for _ in range(n)]
        y = [rng.randint(1, 4) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            with pytest.raises(UndefinedCorrelationError):
                kendall_tau_b(x, y)
            continue
        assert kendall_tau_b(x, y) == tau_oracle(x, y)
        checked += 1


def test_tau_matches_oracle_on_long_float_vectors():
    rng = random.Random(5)
    values = [0.5, 1.0, 2.25, 3.5, 7.0]
    for _ in range(200):
        n = rng.randint(2, 60)
        x = [rng.choice(values) for _ in range(n)]
        y = [rng.choice(values) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        assert kendall_tau_b(x, y) == tau_oracle(x, y)


def test_tau_constant_vector_undefined():
    with pytest.raises(UndefinedCorrelationError):
        kendall_tau_b([2, 2, 2], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError):
        kendall_tau_b([1, 2, 3], [7, 7, 7])


def test_tau_scipy_agreement():
    rng = random.Random(99)
    for _ in range(50):
        n = rng.randint(3, 40)
        x = [rng.randint(1, 6) for _ in range(n)]
        y = [rng.randint(1, 6) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        expected = scipy.stats.kendalltau(x, y).statistic
        assert kendall_tau_b(x, y) == pytest.approx(expected, abs=1e-12)


def test_spearman_monotone_and_reversal():
    assert spearman_rho([1, 2, 3], [1, 4, 9]) == 1.0
    assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0


def test_spearman_recorded_tie_case():
    # midranks x = [1.5, 1.5, 3], y = [1, 2, 3] -> Pearson = sqrt(3)/2
    assert spearman_rho([1, 1, 2], [1, 2, 3]) == pytest.approx(math.sqrt(3) / 2, abs=1e-15)


def test_spearman_equals_rank_then_pearson():
    rng = random.Random(7)
    for _ in range(200):
        n = rng.randint(2, 30)
        x = [rng.randint(1, 5) for _ in range(n)]
        y = [rng.randint(1, 5) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        ranks_x = scipy.stats.rankdata(x, method="average")
        ranks_y = scipy.stats.rankdata(y, method="average")
        expected = np.corrcoef(ranks_x, ranks_y)[0, 1]
        assert spearman_rho(x, y) == pytest.approx(expected, abs=1e-12)
        assert spearman_rho(x, y) == pytest.approx(
            scipy.stats.spearmanr(x, y).statistic, abs=1e-12
        )


def test_midranks():
    assert midranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]
    assert midranks([3, 1, 2]) == [3.0, 1.0, 2.0]
    assert midranks([5, 5, 5]) == [2.0, 2.0, 2.0]


def test_pearson_self_is_exactly_one():
    values = [1.25, 2.5, 3.75, 4.0, 9.0]
    assert pearson_r(values, values) == 1.0


def test_pearson_negation_is_exactly_minus_one():
    values = [1.0, 2.0, 5.0, 7.5]
    assert pearson_r(values, [-v for v in values]) == -1.0


def test_pearson_shift_invariance():
    rng = random.Random(3)
    x = [rng.uniform(0, 10) for _ in range(100)]
    assert pearson_r(x, [v + 17.5 for v in x]) == pytest.approx(1.0, abs=1e-12)


def test_pearson_scipy_agreement():
    rng = random.Random(21)
    x = [rng.uniform(-5, 5) for _ in range(60)]
    y = [rng.uniform(-5, 5) for _ in range(60)]
    assert pearson_r(x, y) == pytest.approx(scipy.stats.pearsonr(x, y).statistic, abs=1e-12)


def test_pearson_constant_undefined():
    with pytest.raises(UndefinedCorrelationError):
        pearson_r([1, 1, 1], [1, 2, 3])


def test_pair_validation():
    with pytest.raises(MetricDomainError, match="length mismatch"):
        kendall_tau_b([1, 2], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError, match="at least 2"):
        spearman_rho([1], [1])
    with pytest.raises(MetricDomainError, match="non-finite"):
        pearson_r([1.0, math.inf], [1.0, 2.0])


_int_vectors = st.integers(min_value=2, max_value=10).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(1, 4), min_size=n, max_size=n),
        st.lists(st.integers(1, 4), min_size=n, max_size=n),
    )
)


@given(_int_vectors)
def test_tau_symmetry_and_range(pair):
    x, y = pair
    try:
        forward = kendall_tau_b(x, y)
    except UndefinedCorrelationError:
        with pytest.raises(UndefinedCorrelationError):
            kendall_tau_b(y, x)
        return
    assert forward == kendall_tau_b(y, x)
    assert -1.0 <= forward <= 1.0
    assert spearman_rho(x, y) == spearman_rho(y, x)


@given(_int_vectors)
def test_rank_stats_invariant_under_increasing_transform(pair):
    x, y = pair
    transformed = [3 * v + 1 for v in x]
    try:
        baseline = kendall_tau_b(x, y)
    except UndefinedCorrelationError:
        return
    assert kendall_tau_b(transformed, y) == baseline
    assert spearman_rho(transformed, y) == spearman_rho(x, y)


REFERENCE = "The man is feeding a cat on the sofa in the living room"
CANDIDATE = "The man is feeding a lion on the sofa in the living room"
REFERENCE_2 = "The girl is dancing in the room"
CANDIDATE_2 = "The girl is sleeping in the room"


def test_rouge_recorded_values():
    assert rouge_l_f(REFERENCE, CANDIDATE) == pytest.approx(92.31, abs=0.01)
    assert rouge_l_f(REFERENCE_2, CANDIDATE_2) == pytest.approx(85.71, abs=0.01)


def test_rouge_identity_and_symmetry():
    assert rouge_l_f(REFERENCE, REFERENCE) == 100.0
    assert rouge_l_f(REFERENCE, CANDIDATE) == rouge_l_f(CANDIDATE, REFERENCE)


def test_rouge_tokenization():
    assert rouge_l_f("A man runs.", "a man runs") == 100.0
    assert rouge_l_f("Hello, world!", "hello world") == 100.0


def test_rouge_disjoint_is_zero():
    assert rouge_l_f("alpha beta", "gamma delta") == 0.0


def test_rouge_empty_errors():
    with pytest.raises(MetricDomainError):
        rouge_l_f("", "a man")
    with pytest.raises(MetricDomainError):
        rouge_l_f("a man", "...")


@given(st.lists(st.sampled_from(["cat", "dog", "runs", "sofa"]), min_size=1, max_size=10))
def test_rouge_self_always_100(words):
    assert rouge_l_f(" ".join(words), " ".join(words)) == 100.0


def test_aggregate_human_ratings():
    assert aggregate_human_ratings([3, 4, 5]) == 4.0
    assert aggregate_human_ratings([2]) == 2.0
    assert aggregate_human_ratings([1, 1, 1]) == 1.0
    with pytest.raises(MetricDomainError):
        aggregate_human_ratings([])
    with pytest.raises(MetricDomainError):
        aggregate_human_ratings([1, 2], method="median")
