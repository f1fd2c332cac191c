import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import r_char_oracle, r_lex_oracle
from sklearn.base import clone

from cmcurate.errors import ConfigError, ScorerUnavailable
from cmcurate.filters import (
    Direction,
    FilterBank,
    FilterConfig,
    FilterVerdict,
    ParallelPair,
    StubScorer,
    char_ngram_repetition,
    char_repetition,
    check_pairs,
    classifier_gate,
    codemix_equilibrium,
    length_ratio_filter,
    lexical_repetition,
    ngram_repetition,
    qe_gate,
    run_filter_bank,
    verdict_passes,
)

SRC = "we should finish the project before the weekend so everyone can rest"
GOOD = "mình nên làm xong project trước cuối tuần để mọi người nghỉ ngơi"


def pair(i, target=GOOD, source=SRC):
    return ParallelPair(f"p{i}", source, target)


class TestStatistics:
    def test_lexical_example(self):
        toks = "a b c d e a b c d e".split()
        # grams: abcde, bcdea, cdeab, deabc, eabcd, abcde -> abcde twice
        assert ngram_repetition(toks) == 2 / 6
        assert ngram_repetition(["x"] * 4) == 0.0
        assert ngram_repetition(["x"] * 6) == 1.0

    def test_char_example(self):
        block = "abcdefghijklmnopqrst"
        # N = 51, U = 20, k = min(7, 31) = 7; 11 grams occur 3 times
        assert char_ngram_repetition(block * 3) == pytest.approx(21 / 51)
        assert char_ngram_repetition("short") == 0.0
        assert char_ngram_repetition("abcdefghijklmnop") == 0.0  # all distinct: k = 0

    def test_char_whitespace_is_collapsed(self):
        assert char_ngram_repetition("ab  cd \n ef gh ij kl") == char_ngram_repetition("ab cd ef gh ij kl")

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from("ab c"), max_size=60).map("".join))
    def test_char_matches_oracle(self, text):
        assert abs(char_ngram_repetition(text) - r_char_oracle(text)) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(["mình", "đi", "team", "ok"]), max_size=30))
    def test_lex_matches_oracle(self, toks):
        assert abs(ngram_repetition(toks) - r_lex_oracle(toks)) <= 1e-12

    @given(st.text(max_size=80))
    def test_ranges(self, text):
        assert 0 <= char_ngram_repetition(text) <= 1
        assert 0 <= ngram_repetition(text.split()) <= 1


class TestVerdicts:
    @pytest.mark.parametrize(
        "stat, threshold, direction, passed",
        [
            (0.3, 0.3, Direction.REJECT_IF_GE, False),
            (0.2999, 0.3, Direction.REJECT_IF_GE, True),
            (0.3, 0.3, Direction.REJECT_IF_GT, True),
            (0.9, 0.9, Direction.REJECT_IF_LT, True),
            (0.8999, 0.9, Direction.REJECT_IF_LT, False),
            (0.5, (0.5, 1.5), Direction.REJECT_IF_OUTSIDE_INTERVAL, True),
            (1.5, (0.5, 1.5), Direction.REJECT_IF_OUTSIDE_INTERVAL, True),
            (1.51, (0.5, 1.5), Direction.REJECT_IF_OUTSIDE_INTERVAL, False),
            (math.nan, 0.3, Direction.REJECT_IF_GE, False),
            (math.nan, 0.9, Direction.REJECT_IF_LT, False),
        ],
    )
    def test_boundaries(self, stat, threshold, direction, passed):
        assert verdict_passes(stat, threshold, direction) is passed

    def test_roundtrip(self):
        for v in (
            FilterVerdict.decide("length_ratio", math.inf, (0.5, 1.5), Direction.REJECT_IF_OUTSIDE_INTERVAL),
            FilterVerdict.decide("lexical_repetition", 0.1, 0.3, Direction.REJECT_IF_GE),
        ):
            assert FilterVerdict.from_dict(v.to_dict()) == v
        d = FilterVerdict.defer("qe", 0.9, Direction.REJECT_IF_LT)
        back = FilterVerdict.from_dict(d.to_dict())
        assert back.deferred and not back.passed and math.isnan(back.statistic)
        assert d.to_dict()["statistic"] is None and d.to_dict()["pass"] is False


class TestHeuristicFilters:
    def test_length_ratio(self, lexicons):
        assert length_ratio_filter(pair(0), lexicons=lexicons).passed
        short = pair(1, target="ok")
        v = length_ratio_filter(short, lexicons=lexicons)
        assert not v.passed and v.statistic == pytest.approx(1 / 12)
        assert not length_ratio_filter(pair(2, source="", target="x"), lexicons=lexicons).passed

    def test_lexical_repetition(self, lexicons):
        rep = pair(0, target=" ".join(["mình đi chơi với team"] * 3))
        assert not lexical_repetition(rep, lexicons=lexicons).passed
        assert lexical_repetition(pair(1), lexicons=lexicons).passed

    def test_char_repetition(self):
        assert not char_repetition(pair(0, target="hahahahahahahahahahahahahaha")).passed
        assert char_repetition(pair(1)).passed

    def test_equilibrium(self, lexicons):
        v = codemix_equilibrium(pair(0), lexicons=lexicons)
        assert v.passed and v.statistic == pytest.approx(1 / 13)
        heavy = pair(1, target="team meeting online deadline hôm nay")
        assert not codemix_equilibrium(heavy, lexicons=lexicons).passed
        # exactly 30% English passes
        edge = pair(2, target="mình đi học rồi nha bạn ơi team online deadline")
        v = codemix_equilibrium(edge, lexicons=lexicons)
        assert v.statistic == pytest.approx(0.3) and v.passed

    def test_verdicts_match_direct_comparison(self, lexicons):
        rng = random.Random(7)
        vocab = ["mình", "đi", "team", "ok", "deadline", "nha", "haha", "!"]
        for i in range(300):
            tgt = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 25)))
            src = " ".join(rng.choice(["we", "go", "now"]) for _ in range(rng.randint(1, 20)))
            p = pair(i, target=tgt, source=src)
            lr = length_ratio_filter(p, lexicons=lexicons)
            assert lr.passed == (0.5 <= len(p.target_tokens) / len(p.source_tokens) <= 1.5)
            lx = lexical_repetition(p, lexicons=lexicons)
            assert lx.passed == (r_lex_oracle([t.surface for t in p.target_tokens]) < 0.3)
            ch = char_repetition(p)
            assert ch.passed == (r_char_oracle(tgt) < 0.2)
            eq = codemix_equilibrium(p, lexicons=lexicons)
            n_b = sum(str(t.tag) == "B" for t in p.target_tokens)
            assert eq.passed == (n_b / len(p.target_tokens) <= 0.30)


class TestGates:
    def test_classifier_threshold(self):
        ps = [pair(i) for i in range(3)]
        vs = classifier_gate(ps, StubScorer({"p0": 0.49, "p1": 0.5, "p2": 0.9}))
        assert [v.passed for v in vs] == [True, False, False]
        assert ps[0].naturalness_score == 0.49

    def test_qe_threshold_and_single_pair(self):
        p = pair(0)
        assert qe_gate(p, StubScorer({"p0": 0.9})).passed
        assert p.quality_score == 0.9
        assert not qe_gate(pair(1), StubScorer({"p1": 0.8999})).passed

    def test_missing_scores_defer(self):
        vs = qe_gate([pair(0), pair(1)], StubScorer({"p0": 0.95}, fail_ids={"p1"}))
        assert vs[0].passed and vs[1].deferred

    def test_unavailable_batch_defers_only_that_batch(self):
        class HalfDown:
            calls = 0

            def score_batch(self, batch):
                HalfDown.calls += 1
                if HalfDown.calls == 2:
                    raise ScorerUnavailable("down")
                return [0.95] * len(batch)

        vs = qe_gate([pair(i) for i in range(5)], HalfDown(), batch_size=2)
        assert [v.deferred for v in vs] == [False, False, True, True, False]

    def test_wrong_length_reply_defers(self):
        class Short:
            def score_batch(self, batch):
                return [0.99]

        assert all(v.deferred for v in qe_gate([pair(0), pair(1)], Short()))

    def test_parallel_batches_keep_order(self):
        table = {f"p{i}": (i % 10) / 10 + 0.05 for i in range(50)}
        ps = [pair(i) for i in range(50)]
        vs = qe_gate(ps, StubScorer(table), threshold=0.5, batch_size=7, max_in_flight=4)
        assert [v.statistic for v in vs] == [table[p.id] for p in ps]


class TestBank:
    def bank_input(self):
        return [
            pair(0),
            pair(1, target="ok"),  # length ratio
            pair(2, target=" ".join(["mình đi chơi với team nha"] * 2)),  # lexical repetition
            pair(3, target="team meeting online deadline update review hôm nay nha"),  # equilibrium
            pair(4),
            pair(5),
        ]

    def test_report_accounting(self, lexicons):
        cfg = FilterConfig(
            lexicons=lexicons,
            classifier=StubScorer({"p4": 0.7}, default=0.1),
            qe=StubScorer({"p5": 0.95}, default=0.95, fail_ids={"p0"}),
        )
        rep = run_filter_bank(self.bank_input(), cfg)
        assert rep.rejected_by == {
            "length_ratio": 1, "lexical_repetition": 1, "char_repetition": 0,
            "codemix_equilibrium": 1, "classifier": 1, "qe": 0,
        }
        assert [p.id for p in rep.accepted] == ["p5"]
        assert [p.id for p in rep.deferred] == ["p0"]
        assert rep.n_accepted + rep.n_rejected + rep.n_deferred == rep.n_input == 6
        assert rep.elimination_rate == pytest.approx(4 / 6)
        assert rep.survived == {"heuristics": 3, "classifier": 2, "qe": 1}

    def test_short_circuit(self, lexicons):
        rep = run_filter_bank([pair(1, target="ok")], FilterConfig(lexicons=lexicons))
        assert [v.filter_name for v in rep.rejected[0].verdicts] == ["length_ratio"]

    def test_disable(self, lexicons):
        rep = run_filter_bank(self.bank_input(), FilterConfig(lexicons=lexicons, disabled={"length_ratio"}))
        assert "length_ratio" not in rep.active_filters
        assert all(v.filter_name != "length_ratio" for p in rep.accepted + rep.rejected for v in p.verdicts)
        with pytest.raises(ConfigError):
            FilterConfig(disabled={"vibes"})

    def test_empty_input(self):
        rep = run_filter_bank([])
        assert rep.n_input == 0 and rep.elimination_rate is None

    @pytest.mark.parametrize(
        "kw", [dict(lexical_threshold=1.5), dict(qe_threshold=-0.1), dict(length_interval=(1.5, 0.5)), dict(char_n=0)]
    )
    def test_config_domain(self, kw):
        with pytest.raises(ConfigError):
            FilterConfig(**kw)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0, 1), st.floats(0, 1))
    def test_qe_threshold_monotone(self, scores, t1, t2):
        lo, hi = sorted((t1, t2))
        table = {f"p{i}": s for i, s in enumerate(scores)}

        def survivors(t):
            ps = [pair(i) for i in range(len(scores))]
            return {p.id for p, v in zip(ps, qe_gate(ps, StubScorer(table), t)) if v.passed}

        assert survivors(hi) <= survivors(lo)

    def test_estimator(self, lexicons):
        bank = FilterBank(lexicons=lexicons, disabled=("char_repetition",))
        assert clone(bank).get_params()["disabled"] == ("char_repetition",)
        out = bank.fit_transform([{"id": "a", "source_text": SRC, "target_text": GOOD}])
        assert [p.id for p in out] == ["a"] and bank.report_.n_accepted == 1


def test_pair_records_roundtrip():
    p = pair(0)
    p.meta["iteration"] = 2
    p.verdicts.append(FilterVerdict.decide("char_repetition", 0.1, 0.2, Direction.REJECT_IF_GE))
    back = ParallelPair.from_record(p.to_record())
    assert back.to_record() == p.to_record()
    with pytest.raises(ValueError):
        ParallelPair.from_record({"id": "x"})


def test_check_pairs():
    with pytest.raises(ValueError):
        check_pairs([pair(0), pair(0)])
    with pytest.raises(TypeError):
        check_pairs("not pairs")
    with pytest.raises(TypeError):
        check_pairs([42])
