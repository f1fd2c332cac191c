import itertools

import numpy as np
import pytest
from builders import agreement_fixture
from hypothesis import given, settings
from hypothesis import strategies as st

from cmcurate.evalharness import (
    JudgePreference,
    SystemScores,
    f1_score,
    metric_decision,
    metric_judge_agreement,
    paired_permutation_test,
    prf_accuracy,
    significance_band,
    win_tie_aggregate,
)

# Confusion matrices on a 400-sample test set that reproduce the printed rows
# of the LID comparison table after rounding to two decimals.
LID_TABLE = {
    "gpt-4o": ((164, 33, 15, 188), (88.00, 83.25, 91.62, 87.23)),
    "ensemble": ((150, 12, 29, 209), (89.75, 92.59, 83.80, 87.98)),
    "lingua": ((73, 1, 106, 220), (73.25, 98.65, 40.78, 57.71)),
}


def brute_force_p(diffs):
    """Oracle: enumerate every sign pattern, count |sum| >= |observed|."""
    obs = abs(sum(diffs))
    hits = 0
    for signs in itertools.product((1, -1), repeat=len(diffs)):
        if abs(sum(s * d for s, d in zip(signs, diffs))) >= obs - 1e-9:
            hits += 1
    return hits / 2 ** len(diffs)


class TestClassificationMetrics:
    @pytest.mark.parametrize("p, r, expected", [(83.25, 91.62, 87.23), (92.59, 83.80, 87.98)])
    def test_f1_from_printed_precision_recall(self, p, r, expected):
        assert abs(f1_score(p, r) - expected) <= 0.02

    @pytest.mark.parametrize("name", sorted(LID_TABLE))
    def test_confusion_matrices_reproduce_table_rows(self, name):
        counts, printed = LID_TABLE[name]
        prf = prf_accuracy(*counts)
        got = (prf.accuracy, prf.precision, prf.recall, prf.f1)
        assert [round(x, 2) for x in got] == list(printed)

    def test_zero_predicted_positives(self, caplog):
        prf = prf_accuracy(0, 0, 5, 5)
        assert prf.precision == 0.0 and prf.precision_undefined and prf.f1 == 0.0
        assert "no predicted positives" in caplog.text

    def test_empty_confusion(self):
        with pytest.raises(ValueError):
            prf_accuracy(0, 0, 0, 0)

    @given(st.floats(0, 100), st.floats(0, 100))
    def test_f1_between_min_and_max(self, p, r):
        f = f1_score(p, r)
        assert min(p, r) - 1e-9 <= f <= max(p, r) + 1e-9


class TestPermutation:
    def test_five_positive_differences_exact(self):
        res = paired_permutation_test(([1.0] * 5, [0.0] * 5))
        assert res.exact and res.p_value == 2 / 32 == 0.0625
        assert res.statistic == 1.0 and res.n_resamples == 32
        assert res.band == "ns"

    def test_degenerate_null(self):
        res = paired_permutation_test(([0.5, 0.7, 0.2], [0.5, 0.7, 0.2]))
        assert res.statistic == 0.0 and res.p_value == 1.0 and res.degenerate

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-5, 5), min_size=2, max_size=9))
    def test_exact_mode_matches_brute_force(self, diffs):
        if not any(diffs):
            return
        a = np.array(diffs, dtype=float)
        res = paired_permutation_test((a, np.zeros_like(a)))
        assert res.exact
        assert res.p_value == brute_force_p(diffs)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=8))
    def test_swap_invariance(self, a):
        b = list(reversed(a))
        s = SystemScores.from_arrays(a, b)
        r1 = paired_permutation_test(s)
        r2 = paired_permutation_test(s.swapped())
        assert r1.p_value == r2.p_value
        assert r1.statistic == pytest.approx(-r2.statistic, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(1, 9), min_size=2, max_size=9), st.integers(0, 8), st.integers(1, 5))
    def test_p_non_increasing_as_one_difference_grows(self, diffs, k, bump):
        k %= len(diffs)
        bigger = list(diffs)
        bigger[k] += bump
        p0 = paired_permutation_test((np.array(diffs, float), np.zeros(len(diffs)))).p_value
        p1 = paired_permutation_test((np.array(bigger, float), np.zeros(len(diffs)))).p_value
        assert p1 <= p0

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(-5, 5), min_size=2, max_size=8))
    def test_zero_difference_segment_keeps_exact_ratio(self, diffs):
        if not any(diffs):
            return
        a = np.array(diffs, float)
        p = paired_permutation_test((a, np.zeros_like(a))).p_value
        a0 = np.append(a, 0.0)
        assert paired_permutation_test((a0, np.zeros_like(a0))).p_value == p

    def test_monte_carlo_is_deterministic_and_add_one(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=40), rng.normal(size=40)
        r1 = paired_permutation_test((a, b), n_resamples=2000, seed=11)
        r2 = paired_permutation_test((a, b), n_resamples=2000, seed=11)
        assert not r1.exact and r1.p_value == r2.p_value
        assert 0 < r1.p_value <= 1
        # (hits + 1) / (n + 1) never reaches zero
        strong = paired_permutation_test((a + 10, b), n_resamples=2000, seed=1)
        assert strong.p_value == 1 / 2001 and strong.band == "strong"

    def test_workers_reproducible_for_fixed_count(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=30), rng.normal(size=30)
        r1 = paired_permutation_test((a, b), n_resamples=4000, seed=2, n_jobs=3)
        r2 = paired_permutation_test((a, b), n_resamples=4000, seed=2, n_jobs=3)
        assert r1.p_value == r2.p_value
        single = paired_permutation_test((a, b), n_resamples=4000, seed=2)
        assert abs(r1.p_value - single.p_value) < 0.05

    def test_preconditions(self):
        with pytest.raises(ValueError):
            paired_permutation_test(([1.0], [0.0]))
        with pytest.raises(ValueError):
            paired_permutation_test(([1.0, 2.0], [0.0, 0.0]), n_resamples=999)

    def test_uniform_under_null_small(self):
        stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(0)
        ps = [
            paired_permutation_test((rng.normal(size=50), rng.normal(size=50)), n_resamples=1000, seed=i).p_value
            for i in range(100)
        ]
        assert stats.kstest(ps, "uniform").pvalue > 0.01

    @pytest.mark.parametrize("p, band", [(0.0005, "strong"), (0.001, "significant"), (0.049, "significant"), (0.05, "ns")])
    def test_bands(self, p, band):
        assert significance_band(p) == band


class TestAgreement:
    def test_margin_examples(self):
        assert metric_decision(0.90, 0.85) == "A"
        assert metric_decision(0.90, 0.89) is None
        assert metric_decision(0.85, 0.90) == "B"
        assert metric_decision(90.0, 89.0, margin=0.5, mode="absolute") == "A"
        assert metric_decision(90.0, 89.8, margin=0.5, mode="absolute") is None
        with pytest.raises(ValueError):
            metric_decision(1, 2, mode="other")

    def test_decided_match_and_tie(self):
        scores = SystemScores("x", "y", (("s1", 0.90, 0.85), ("s2", 0.90, 0.89)))
        prefs = [JudgePreference("s1", "A"), JudgePreference("s2", "B")]
        res = metric_judge_agreement(scores, prefs)
        assert (res.n_decided, res.n_agree, res.agreement) == (1, 1, 1.0)

    def test_perfect_alignment(self):
        scores, prefs = agreement_fixture(n_decided=100, n_agree=100, seed=4)
        assert metric_judge_agreement(scores, prefs).agreement == 1.0

    def test_planted_fixture(self):
        scores, prefs = agreement_fixture()
        res = metric_judge_agreement(scores, prefs)
        assert res.n_decided == 493 and res.n_agree == 395
        assert abs(100 * res.agreement - 80.1) <= 0.1
        assert res.n_total == 493 + 40 + 30

    def test_nothing_decided_is_null(self):
        scores = SystemScores("x", "y", (("s1", 0.9, 0.9),))
        res = metric_judge_agreement(scores, [JudgePreference("s1", "Tie")])
        assert res.agreement is None and res.n_decided == 0

    def test_symmetric_under_system_swap(self):
        scores, prefs = agreement_fixture(n_decided=60, n_agree=45, seed=9)
        flip = {"A": "B", "B": "A", "Tie": "Tie", "BothBad": "BothBad"}
        flipped = [JudgePreference(p.id, flip[p.verdict]) for p in prefs]
        r1 = metric_judge_agreement(scores, prefs)
        r2 = metric_judge_agreement(scores.swapped(), flipped)
        assert r1 == r2

    def test_missing_preferences_and_bad_margin(self):
        scores = SystemScores("x", "y", (("s1", 0.9, 0.5),))
        with pytest.raises(ValueError):
            metric_judge_agreement(scores, [])
        with pytest.raises(ValueError):
            metric_judge_agreement(scores, [JudgePreference("s1", "A")], margin=1.0)


class TestWinTie:
    def test_all_a(self):
        out = win_tie_aggregate(["A"] * 7)
        assert (out["win_pct"], out["loss_pct"], out["tie_pct"], out["bothbad_pct"]) == (100, 0, 0, 0)

    def test_one_each(self):
        out = win_tie_aggregate([JudgePreference(str(i), v) for i, v in enumerate(["A", "B", "Tie", "BothBad"])])
        assert out["win_pct"] == out["loss_pct"] == out["tie_pct"] == out["bothbad_pct"] == 25.0

    @given(st.lists(st.sampled_from(["A", "B", "Tie", "BothBad"]), min_size=1, max_size=300))
    def test_percentages_sum_to_100(self, verdicts):
        out = win_tie_aggregate(verdicts)
        total = out["win_pct"] + out["loss_pct"] + out["tie_pct"] + out["bothbad_pct"]
        assert abs(total - 100) <= 1e-9

    def test_errors(self):
        with pytest.raises(ValueError):
            win_tie_aggregate([])
        with pytest.raises(ValueError):
            win_tie_aggregate(["A", "maybe"])
        with pytest.raises(ValueError):
            JudgePreference("x", "maybe")


def test_system_scores_validation():
    with pytest.raises(ValueError):
        SystemScores("a", "b", (("s", 1.0, 2.0), ("s", 1.0, 2.0)))
    with pytest.raises(ValueError):
        SystemScores("a", "b", (("s", 1.0, None),))
    with pytest.raises(ValueError):
        SystemScores.from_arrays([1, 2], [1])
