"""Statistical evaluation helpers.

Paired permutation tests over per-segment scores, metric-vs-judge agreement
with a tie margin, judge win/loss/tie aggregation and binary classification
metrics.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "PRF",
    "SystemScores",
    "JudgePreference",
    "PermutationResult",
    "AgreementResult",
    "JUDGE_VERDICTS",
    "f1_score",
    "prf_accuracy",
    "paired_permutation_test",
    "significance_band",
    "metric_decision",
    "metric_judge_agreement",
    "win_tie_aggregate",
]

JUDGE_VERDICTS = ("A", "B", "Tie", "BothBad")


@dataclass(frozen=True)
class PRF:
    """Binary classification scores, all in percent."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    precision_undefined: bool = False

    def to_dict(self):
        return asdict(self)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (same units in, same units out)."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf_accuracy(tp: int, fp: int, fn: int, tn: int) -> PRF:
    total = tp + fp + fn + tn
    if total == 0:
        raise ValueError("cannot score an empty confusion matrix")
    undefined = tp + fp == 0
    if undefined:
        logger.warning("no predicted positives; precision set to 0")
    precision = 0.0 if undefined else 100.0 * tp / (tp + fp)
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    return PRF(
        accuracy=100.0 * (tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision_undefined=undefined,
    )


@dataclass(frozen=True)
class SystemScores:
    """Aligned per-segment scores of two systems."""

    system_a: str
    system_b: str
    segments: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        ids = [s[0] for s in self.segments]
        if len(set(ids)) != len(ids):
            raise ValueError("segment ids must be unique")
        for seg in self.segments:
            if len(seg) != 3 or seg[1] is None or seg[2] is None:
                raise ValueError(f"segment {seg!r} lacks a paired score")

    @classmethod
    def from_arrays(cls, score_a, score_b, ids=None, system_a="A", system_b="B"):
        score_a = np.asarray(score_a, dtype=float)
        score_b = np.asarray(score_b, dtype=float)
        if score_a.shape != score_b.shape or score_a.ndim != 1:
            raise ValueError("score arrays must be 1-D and the same length")
        if ids is None:
            ids = [str(i) for i in range(len(score_a))]
        return cls(
            system_a,
            system_b,
            tuple((str(i), float(a), float(b)) for i, a, b in zip(ids, score_a, score_b)),
        )

    @property
    def ids(self):
        return [s[0] for s in self.segments]

    def arrays(self):
        a = np.fromiter((s[1] for s in self.segments), dtype=float, count=len(self.segments))
        b = np.fromiter((s[2] for s in self.segments), dtype=float, count=len(self.segments))
        return a, b

    def swapped(self):
        return SystemScores(
            self.system_b, self.system_a, tuple((i, b, a) for i, a, b in self.segments)
        )


@dataclass(frozen=True)
class JudgePreference:
    id: str
    verdict: str
    rationale: str = ""

    def __post_init__(self):
        if self.verdict not in JUDGE_VERDICTS:
            raise ValueError(f"verdict must be one of {JUDGE_VERDICTS}, got {self.verdict!r}")


@dataclass(frozen=True)
class PermutationResult:
    statistic: float
    p_value: float
    n_segments: int
    n_resamples: int
    exact: bool
    degenerate: bool = False
    band: str = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "band", significance_band(self.p_value))

    def to_dict(self):
        return asdict(self)


def significance_band(p: float) -> str:
    """``strong`` (p < .001), ``significant`` (p < .05) or ``ns``."""
    if p < 0.001:
        return "strong"
    if p < 0.05:
        return "significant"
    return "ns"


def _tail_count(diffs, signs, threshold):
    # |sum(sign * d)| >= |observed sum|, with a tolerance for summation order.
    sums = np.abs(signs @ diffs)
    return int(np.count_nonzero(sums >= threshold))


def _mc_count(diffs, threshold, n, rng, chunk=4096):
    hits = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        signs = rng.integers(0, 2, size=(m, diffs.size), dtype=np.int8) * 2 - 1
        hits += _tail_count(diffs, signs.astype(float), threshold)
        done += m
    return hits


def paired_permutation_test(
    scores: SystemScores | tuple,
    n_resamples: int = 10_000,
    seed: int | None = 0,
    n_jobs: int = 1,
) -> PermutationResult:
    """Two-sided paired sign-flip permutation test on ``score_a - score_b``.

    When ``2**n <= n_resamples`` every sign pattern is enumerated and the
    p-value is the exact tail ratio. Otherwise ``n_resamples`` random sign
    vectors are drawn and ``p = (hits + 1) / (n_resamples + 1)``.

    With ``n_jobs == 1`` results are bit-identical for a given seed. With more
    workers each gets an independent stream spawned from the seed, so results
    are reproducible for a fixed ``(seed, n_jobs)`` but differ across worker
    counts.
    """
    if isinstance(scores, SystemScores):
        a, b = scores.arrays()
    else:
        a, b = (np.asarray(x, dtype=float) for x in scores)
    diffs = a - b
    n = diffs.size
    if n < 2:
        raise ValueError("need at least 2 segments")
    if n_resamples < 1000:
        raise ValueError("n_resamples must be >= 1000")
    statistic = float(diffs.mean())

    if not np.any(diffs):
        return PermutationResult(statistic, 1.0, n, n_resamples, exact=False, degenerate=True)

    observed = abs(float(diffs.sum()))
    threshold = observed - 1e-9 * max(float(np.abs(diffs).sum()), 1e-300)

    if n < 63 and 2**n <= n_resamples:
        patterns = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        signs = patterns * 2.0 - 1.0
        hits = _tail_count(diffs, signs, threshold)
        return PermutationResult(statistic, hits / 2**n, n, 2**n, exact=True)

    if n_jobs <= 1:
        hits = _mc_count(diffs, threshold, n_resamples, np.random.default_rng(seed))
    else:
        children = np.random.SeedSequence(seed).spawn(n_jobs)
        shares = [n_resamples // n_jobs + (i < n_resamples % n_jobs) for i in range(n_jobs)]
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            hits = sum(
                pool.map(
                    lambda job: _mc_count(diffs, threshold, job[0], np.random.default_rng(job[1])),
                    zip(shares, children),
                )
            )
    return PermutationResult(statistic, (hits + 1) / (n_resamples + 1), n, n_resamples, exact=False)


@dataclass(frozen=True)
class AgreementResult:
    n_total: int
    n_metric_decided: int
    n_judge_decided: int
    n_decided: int
    n_agree: int
    agreement: float | None

    def to_dict(self):
        return asdict(self)


def metric_decision(score_a: float, score_b: float, margin: float = 0.02, mode: str = "relative"):
    """Return ``"A"``, ``"B"`` or ``None`` (a metric tie).

    Relative mode: A wins when ``score_a > score_b * (1 + margin)``.
    Absolute mode: A wins when ``score_a > score_b + margin``.
    """
    if mode == "relative":
        if score_a > score_b * (1 + margin):
            return "A"
        if score_b > score_a * (1 + margin):
            return "B"
        return None
    if mode == "absolute":
        if score_a > score_b + margin:
            return "A"
        if score_b > score_a + margin:
            return "B"
        return None
    raise ValueError(f"unknown margin mode {mode!r}")


def metric_judge_agreement(
    scores: SystemScores,
    prefs: Sequence[JudgePreference] | Mapping[str, JudgePreference],
    margin: float = 0.02,
    mode: str = "relative",
) -> AgreementResult:
    """Agreement between metric wins and judge preferences.

    Segments where the metric ties (within ``margin``) or the judge says
    ``Tie``/``BothBad`` are excluded; agreement is matches over the remaining
    jointly decided segments, or ``None`` if there are none.
    """
    if not 0 <= margin < 1:
        raise ValueError("margin must be in [0, 1)")
    by_id = prefs if isinstance(prefs, Mapping) else {p.id: p for p in prefs}
    missing = [i for i in scores.ids if i not in by_id]
    if missing:
        raise ValueError(f"no judge preference for segments {missing[:5]}")

    metric_decided = judge_decided = decided = agree = 0
    for seg_id, sa, sb in scores.segments:
        m = metric_decision(sa, sb, margin, mode)
        j = by_id[seg_id].verdict
        j = j if j in ("A", "B") else None
        metric_decided += m is not None
        judge_decided += j is not None
        if m is not None and j is not None:
            decided += 1
            agree += m == j
    return AgreementResult(
        n_total=len(scores.segments),
        n_metric_decided=metric_decided,
        n_judge_decided=judge_decided,
        n_decided=decided,
        n_agree=agree,
        agreement=agree / decided if decided else None,
    )


def win_tie_aggregate(prefs: Sequence[JudgePreference | str]) -> dict[str, float]:
    """Percentages of A (win), B (loss), Tie and BothBad verdicts."""
    verdicts = [p.verdict if isinstance(p, JudgePreference) else p for p in prefs]
    if not verdicts:
        raise ValueError("no preferences to aggregate")
    bad = set(verdicts) - set(JUDGE_VERDICTS)
    if bad:
        raise ValueError(f"unknown verdicts {sorted(bad)}")
    c = Counter(verdicts)
    n = len(verdicts)
    return {
        "n": n,
        "win_pct": 100.0 * c["A"] / n,
        "loss_pct": 100.0 * c["B"] / n,
        "tie_pct": 100.0 * c["Tie"] / n,
        "bothbad_pct": 100.0 * c["BothBad"] / n,
    }

