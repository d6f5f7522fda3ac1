import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pqcorr.aggregate import (
    AggregationMatrix,
    ThresholdRule,
    aggregation_counts,
    per_parameter_site_shares,
    significant,
    write_shares_by_parameter,
)
from pqcorr.estimators import SignificanceAggregator
from pqcorr.matrices import PARAMETERS_AT_SITE, SITES_FOR_PARAMETER, CorrelationMatrix
from pqcorr.matrices import site_matrices
from pqcorr.synth import SynthSpec, generate_campaign

from oracles import naive_counts

from conftest import param


@pytest.mark.parametrize(
    "r, sense, expected",
    [
        (0.72, "positive", 1),
        (0.7, "positive", 1),
        (-0.9, "positive", 0),
        (-0.9, "negative", 1),
        (-0.9, "absolute", 1),
        (0.69, "positive", 0),
        (-0.8, "positive", 0),
        (-0.8, "negative", 1),
        (-0.8, "absolute", 1),
        (0.75, "negative", 0),
        (None, "absolute", 0),
        (float("nan"), "positive", 0),
    ],
)
def test_significant_examples(r, sense, expected):
    assert significant(r, ThresholdRule(0.7, sense)) == expected


def test_rule_validation():
    for tau in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            ThresholdRule(tau)
    with pytest.raises(ValueError):
        ThresholdRule(0.5, "both")
    assert significant(1.0, ThresholdRule(1.0)) == 1


def _cm(entries, labels=("a", "b", "c"), subject=""):
    return CorrelationMatrix(labels, entries, PARAMETERS_AT_SITE, subject)


def test_three_matrix_example():
    base = np.eye(3)
    mats = []
    for r in (0.9, 0.65, 0.72):
        e = base.copy()
        e[0, 1] = e[1, 0] = r
        mats.append(_cm(e))
    agg = aggregation_counts(mats)
    assert agg.M == 3 and agg.counts[0, 1] == 2
    assert agg.shares[0, 1] == pytest.approx(2 / 3)
    assert agg.counts[0, 0] == 3 and agg.counts[0, 2] == 0
    low = aggregation_counts([_cm(np.full((3, 3), 0.1)) for _ in range(4)])
    assert not low.counts.any()


def test_absent_entries_and_denominators():
    e1 = np.array([[1, np.nan], [np.nan, 1]])
    e2 = np.array([[1, 0.9], [0.9, 1]])
    mats = [_cm(e1, ("a", "b")), _cm(e2, ("a", "b"))]
    total = aggregation_counts(mats)
    valid = aggregation_counts(mats, denominator="valid")
    assert total.shares[0, 1] == 0.5
    assert valid.shares[0, 1] == 1.0
    assert valid.valid[0, 1] == 1


def test_label_mismatch():
    with pytest.raises(ValueError, match="label"):
        aggregation_counts([_cm(np.eye(3)), _cm(np.eye(3), ("a", "c", "b"))])
    with pytest.raises(ValueError):
        aggregation_counts([])


def test_four_site_share():
    e = np.full((4, 4), 0.1)
    np.fill_diagonal(e, np.nan)
    e[0, 1] = e[1, 0] = 0.9
    e[2, 3] = e[3, 2] = 0.8
    m = CorrelationMatrix(("s1", "s2", "s3", "s4"), e, SITES_FOR_PARAMETER, "U03")
    assert per_parameter_site_shares({"U03": m}) == {"U03": pytest.approx(2 / 6)}


def test_null_campaign_shares_small():
    c = generate_campaign(SynthSpec((6, 0, 0), tuple(param(x) for x in ("U03", "UNB", "Upst")), days=5, seed=2))
    shares = per_parameter_site_shares(site_matrices(c))
    assert max(shares.values()) < 0.05


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    mats = [_cm(_sym(rng, 3)) for _ in range(4)]
    agg = aggregation_counts(mats, ThresholdRule(0.3, "absolute"), "valid")
    agg.to_csv(tmp_path, "x")
    back = AggregationMatrix.from_csv(tmp_path, "x")
    assert back.labels == agg.labels and back.M == 4 and back.rule == agg.rule
    assert np.array_equal(back.counts, agg.counts)
    assert np.array_equal(back.shares, agg.shares)
    write_shares_by_parameter({"U03": 0.25}, tmp_path, agg.rule, 4)
    assert (tmp_path / "shares_by_parameter.csv").read_text() == "parameter,share\nU03,0.25\n"


def _sym(rng, n):
    a = rng.uniform(-1, 1, (n, n))
    a = (a + a.T) / 2
    np.fill_diagonal(a, 1.0)
    return a


def _stack_strategy():
    return st.integers(2, 5).flatmap(
        lambda n: st.integers(1, 6).flatmap(
            lambda m: hnp.arrays(np.float64, (m, n, n), elements=st.floats(-1, 1) | st.just(np.nan))
        )
    )


def _symmetrize(stack):
    s = np.triu(stack) + np.transpose(np.triu(stack, 1), (0, 2, 1))
    return s


@settings(max_examples=150, deadline=None)
@given(_stack_strategy(), st.floats(0.05, 1.0), st.sampled_from(["positive", "negative", "absolute"]))
def test_counts_match_naive(stack, tau, sense):
    stack = _symmetrize(stack)
    n = stack.shape[1]
    labels = tuple(f"p{i}" for i in range(n))
    agg = aggregation_counts([_cm(e, labels) for e in stack], ThresholdRule(tau, sense))
    assert np.array_equal(agg.counts, naive_counts(stack, tau, sense))
    assert ((0 <= agg.shares) & (agg.shares <= 1)).all()


@settings(max_examples=100, deadline=None)
@given(_stack_strategy(), st.floats(0.05, 0.5), st.floats(0.0, 0.5))
def test_monotone_in_tau_and_sense_consistency(stack, tau, extra):
    stack = _symmetrize(stack)
    lo = ThresholdRule(tau).indicator(stack).sum(0)
    hi = ThresholdRule(tau + extra).indicator(stack).sum(0)
    assert (hi <= lo).all()
    pos = ThresholdRule(tau, "positive").indicator(stack).sum(0)
    neg = ThresholdRule(tau, "negative").indicator(stack).sum(0)
    ab = ThresholdRule(tau, "absolute").indicator(stack).sum(0)
    assert np.array_equal(ab, pos + neg)


@settings(max_examples=100, deadline=None)
@given(_stack_strategy(), st.randoms(use_true_random=False))
def test_permutation_invariance(stack, rnd):
    stack = _symmetrize(stack)
    n = stack.shape[1]
    perm = list(range(n))
    rnd.shuffle(perm)
    labels = tuple(f"p{i}" for i in range(n))
    a = aggregation_counts([_cm(e, labels) for e in stack]).counts
    p = aggregation_counts([_cm(e[np.ix_(perm, perm)], tuple(labels[i] for i in perm)) for e in stack]).counts
    assert np.array_equal(p, a[np.ix_(perm, perm)])
    # order of the matrices does not matter either
    r = aggregation_counts([_cm(e, labels) for e in stack[::-1]]).counts
    assert np.array_equal(r, a)


def test_estimator_wrapper():
    rng = np.random.default_rng(0)
    stack = np.stack([_sym(rng, 4) for _ in range(5)])
    est = SignificanceAggregator(tau=0.5, sense="absolute")
    shares = est.fit_transform(stack)
    assert np.array_equal(est.counts_, naive_counts(stack, 0.5, "absolute"))
    assert shares.shape == (4, 4) and est.M_ == 5
    assert est.get_params() == {"tau": 0.5, "sense": "absolute"}
