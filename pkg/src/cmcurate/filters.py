"""Quality filters for synthetic parallel pairs.

Four heuristic filters run first, in this order, and stop at the first failure:

``length_ratio``
    target/source token ratio must lie in [0.5, 1.5].
``lexical_repetition``
    share of 5-gram occurrences belonging to repeated 5-grams must be < 0.3.
``char_repetition``
    share of 10-character n-gram occurrences held by the top
    ``k = min(floor(sqrt(N)), N - U)`` types must be < 0.2.
``codemix_equilibrium``
    embedded-language tokens may be at most 30% of target tokens.

Survivors then go through two model gates: ``classifier`` (probability of
being synthetic must be < 0.5) and ``qe`` (quality estimate must be >= 0.9).
A gate whose scorer cannot answer marks the pair *deferred*; deferred pairs
are reported separately and never accepted.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .audit import audit
from .backends import JsonBackend, MalformedResponse
from .errors import BackendError, ConfigError, ScorerUnavailable
from .textcore import LanguageTag, LexiconSet, Token, tag_tokens, tokenize

logger = logging.getLogger(__name__)

__all__ = [
    "Direction",
    "FilterVerdict",
    "ParallelPair",
    "ScorerBackend",
    "StubScorer",
    "JsonScorer",
    "FilterConfig",
    "FilterReport",
    "HEURISTIC_FILTERS",
    "FILTER_NAMES",
    "verdict_passes",
    "ngram_repetition",
    "char_ngram_repetition",
    "length_ratio_filter",
    "lexical_repetition",
    "char_repetition",
    "codemix_equilibrium",
    "classifier_gate",
    "qe_gate",
    "run_filter_bank",
    "check_pairs",
    "FilterBank",
]

HEURISTIC_FILTERS = ("length_ratio", "lexical_repetition", "char_repetition", "codemix_equilibrium")
FILTER_NAMES = HEURISTIC_FILTERS + ("classifier", "qe")


class Direction(str, Enum):
    REJECT_IF_GE = "reject_if_ge"
    REJECT_IF_GT = "reject_if_gt"
    REJECT_IF_LT = "reject_if_lt"
    REJECT_IF_OUTSIDE_INTERVAL = "reject_if_outside_interval"


def verdict_passes(statistic: float, threshold, direction: Direction) -> bool:
    """The comparison every verdict is defined by. NaN never passes."""
    direction = Direction(direction)
    if direction is Direction.REJECT_IF_GE:
        return statistic < threshold
    if direction is Direction.REJECT_IF_GT:
        return statistic <= threshold
    if direction is Direction.REJECT_IF_LT:
        return statistic >= threshold
    lo, hi = threshold
    return lo <= statistic <= hi


@dataclass(frozen=True)
class FilterVerdict:
    filter_name: str
    statistic: float
    threshold: float | tuple[float, float]
    passed: bool
    direction: Direction
    deferred: bool = False

    @classmethod
    def decide(cls, name, statistic, threshold, direction):
        return cls(name, statistic, threshold, verdict_passes(statistic, threshold, direction), Direction(direction))

    @classmethod
    def defer(cls, name, threshold, direction):
        return cls(name, math.nan, threshold, False, Direction(direction), deferred=True)

    def to_dict(self):
        return {
            "filter_name": self.filter_name,
            "statistic": _json_float(self.statistic),
            "threshold": list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold,
            "pass": self.passed,
            "direction": self.direction.value,
            "deferred": self.deferred,
        }

    @classmethod
    def from_dict(cls, d):
        th = d["threshold"]
        stat = d["statistic"]
        return cls(
            d["filter_name"],
            math.nan if stat is None else float(stat),
            tuple(th) if isinstance(th, list) else th,
            d["pass"],
            Direction(d["direction"]),
            d.get("deferred", False),
        )


def _json_float(x):
    # JSON has no NaN/inf: NaN (deferred) becomes null, infinities become strings.
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class ParallelPair:
    """A candidate (source, target) pair; target is the generated code-mixed side."""

    id: str
    source_text: str
    target_text: str
    source_tokens: list[Token] | None = None
    target_tokens: list[Token] | None = None
    verdicts: list[FilterVerdict] = field(default_factory=list)
    quality_score: float | None = None
    naturalness_score: float | None = None
    meta: dict = field(default_factory=dict)

    def ensure_tokens(self, lexicons: LexiconSet) -> "ParallelPair":
        if self.source_tokens is None:
            self.source_tokens = tokenize(self.source_text)
        if self.target_tokens is None or any(t.tag is None for t in self.target_tokens):
            self.target_tokens = tag_tokens(
                self.target_tokens if self.target_tokens is not None else tokenize(self.target_text),
                lexicons,
            )
        return self

    @property
    def accepted(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)

    @property
    def failing_verdict(self) -> FilterVerdict | None:
        return next((v for v in self.verdicts if not v.passed), None)

    def to_record(self) -> dict:
        rec = dict(self.meta)
        rec.update(
            id=self.id,
            source_text=self.source_text,
            target_text=self.target_text,
            verdicts=[v.to_dict() for v in self.verdicts],
            quality_score=self.quality_score,
            naturalness_score=self.naturalness_score,
        )
        return rec

    @classmethod
    def from_record(cls, rec: Mapping, source_field="source_text", target_field="target_text"):
        known = {"id", source_field, target_field, "verdicts", "quality_score", "naturalness_score"}
        try:
            return cls(
                id=str(rec["id"]),
                source_text=rec[source_field],
                target_text=rec[target_field],
                verdicts=[FilterVerdict.from_dict(v) for v in rec.get("verdicts") or []],
                quality_score=rec.get("quality_score"),
                naturalness_score=rec.get("naturalness_score"),
                meta={k: v for k, v in rec.items() if k not in known},
            )
        except KeyError as e:
            raise ValueError(f"pair record lacks field {e}") from None


def check_pairs(X) -> list[ParallelPair]:
    """Coerce an iterable of pairs or pair dicts to ``ParallelPair`` objects."""
    if isinstance(X, (str, bytes, Mapping)):
        raise TypeError("expected an iterable of pairs")
    out = []
    for i, x in enumerate(X):
        if isinstance(x, ParallelPair):
            out.append(x)
        elif isinstance(x, Mapping):
            out.append(ParallelPair.from_record(x))
        else:
            raise TypeError(f"item {i}: expected ParallelPair or dict, got {type(x).__name__}")
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise ValueError("pair ids must be unique")
    return out


# --- heuristic statistics -------------------------------------------------


def ngram_repetition(items: Sequence, n: int = 5) -> float:
    """Occurrences of n-grams seen more than once over all n-gram occurrences."""
    if len(items) < n:
        return 0.0
    counts = Counter(tuple(items[i : i + n]) for i in range(len(items) - n + 1))
    total = sum(counts.values())
    return sum(c for c in counts.values() if c > 1) / total


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def char_ngram_repetition(text: str, n: int = 10, normalize: bool = True) -> float:
    """Share of n-gram occurrences covered by the ``k`` most frequent types.

    ``k = min(floor(sqrt(N)), N - U)`` for ``N`` windows and ``U`` distinct
    n-grams; 0 when the text is shorter than ``n`` or ``k`` is 0.
    """
    if normalize:
        text = _normalize_ws(text)
    total = len(text) - n + 1
    if total <= 0:
        return 0.0
    counts = Counter(text[i : i + n] for i in range(total))
    k = min(math.isqrt(total), total - len(counts))
    if k <= 0:
        return 0.0
    top = sorted(counts.values(), reverse=True)[:k]
    return sum(top) / total


# --- filters ----------------------------------------------------------------


def _tokens(pair: ParallelPair, lexicons: LexiconSet | None):
    if pair.source_tokens is None or pair.target_tokens is None or any(
        t.tag is None for t in pair.target_tokens
    ):
        pair.ensure_tokens(lexicons or LexiconSet.default())
    return pair.source_tokens, pair.target_tokens


def length_ratio_filter(pair, interval=(0.5, 1.5), lexicons=None) -> FilterVerdict:
    src, tgt = _tokens(pair, lexicons)
    ratio = len(tgt) / len(src) if src else math.inf
    return FilterVerdict.decide("length_ratio", ratio, tuple(interval), Direction.REJECT_IF_OUTSIDE_INTERVAL)


def lexical_repetition(pair, threshold=0.3, n=5, lexicons=None) -> FilterVerdict:
    _, tgt = _tokens(pair, lexicons)
    stat = ngram_repetition([t.surface for t in tgt], n)
    return FilterVerdict.decide("lexical_repetition", stat, threshold, Direction.REJECT_IF_GE)


def char_repetition(pair, threshold=0.2, n=10) -> FilterVerdict:
    stat = char_ngram_repetition(pair.target_text, n)
    return FilterVerdict.decide("char_repetition", stat, threshold, Direction.REJECT_IF_GE)


def codemix_equilibrium(pair, threshold=0.30, lexicons=None) -> FilterVerdict:
    _, tgt = _tokens(pair, lexicons)
    n_b = sum(1 for t in tgt if t.tag is LanguageTag.LANG_B)
    stat = n_b / len(tgt) if tgt else math.inf
    return FilterVerdict.decide("codemix_equilibrium", stat, threshold, Direction.REJECT_IF_GT)


# --- scorers ----------------------------------------------------------------


class ScorerBackend(Protocol):
    """Scores a batch of pairs. ``None`` in the result means no score for that pair.

    Raising :class:`ScorerUnavailable` defers the whole batch.
    """

    def score_batch(self, pairs: Sequence[ParallelPair]) -> list[float | None]: ...


class StubScorer:
    """Canned scores keyed by pair id, for tests and dry runs.

    ``default`` is used for ids missing from the table (``None`` makes them
    unavailable); ids in ``fail_ids`` are always unavailable.
    """

    def __init__(self, table: Mapping[str, float] | None = None, default=None, fail_ids=()):
        self.table = dict(table or {})
        self.default = default
        self.fail_ids = set(fail_ids)
        self.calls = 0

    def score_batch(self, pairs):
        self.calls += 1
        out = []
        for p in pairs:
            if p.id in self.fail_ids:
                out.append(None)
            else:
                out.append(self.table.get(p.id, self.default))
        return out


class JsonScorer:
    """Scores pairs through a :class:`JsonBackend` answering ``{"score": float}``."""

    def __init__(self, backend: JsonBackend, max_in_flight: int = 4):
        self.backend = backend
        self.max_in_flight = max_in_flight

    def _one(self, pair):
        try:
            resp = self.backend.request(pair.target_text, pair.id, source_text=pair.source_text)
            score = resp.get("score")
            if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
                raise MalformedResponse(f"invalid score {score!r}")
            return float(score)
        except BackendError as e:
            logger.warning("scorer %s: no score for %s: %s", self.backend.name, pair.id, e)
            return None

    def score_batch(self, pairs):
        with ThreadPoolExecutor(max_workers=max(1, self.max_in_flight)) as pool:
            return list(pool.map(self._one, pairs))


def _gate(name, pairs, scorer, threshold, direction, attr, batch_size, max_in_flight):
    """Score ``pairs`` in batches and return one verdict per pair, in input order."""
    batches = [pairs[i : i + batch_size] for i in range(0, len(pairs), batch_size)]

    def run(batch):
        try:
            scores = scorer.score_batch(batch)
            if len(scores) != len(batch):
                raise ScorerUnavailable(f"{name}: got {len(scores)} scores for {len(batch)} pairs")
            return scores
        except (ScorerUnavailable, BackendError) as e:
            logger.warning("%s scorer unavailable for a batch of %d: %s", name, len(batch), e)
            return [None] * len(batch)

    if max_in_flight > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]

    verdicts = []
    for batch, scores in zip(batches, results):
        for pair, s in zip(batch, scores):
            if s is None:
                verdicts.append(FilterVerdict.defer(name, threshold, direction))
            else:
                setattr(pair, attr, float(s))
                verdicts.append(FilterVerdict.decide(name, float(s), threshold, direction))
    return verdicts


def classifier_gate(pair_or_pairs, scorer: ScorerBackend, threshold=0.5, batch_size=32, max_in_flight=1):
    """Reject pairs whose probability of being synthetic is >= ``threshold``."""
    single = isinstance(pair_or_pairs, ParallelPair)
    pairs = [pair_or_pairs] if single else list(pair_or_pairs)
    v = _gate("classifier", pairs, scorer, threshold, Direction.REJECT_IF_GE,
              "naturalness_score", batch_size, max_in_flight)
    return v[0] if single else v


def qe_gate(pair_or_pairs, scorer: ScorerBackend, threshold=0.9, batch_size=32, max_in_flight=1):
    """Reject pairs whose quality estimate is below ``threshold``."""
    single = isinstance(pair_or_pairs, ParallelPair)
    pairs = [pair_or_pairs] if single else list(pair_or_pairs)
    v = _gate("qe", pairs, scorer, threshold, Direction.REJECT_IF_LT,
              "quality_score", batch_size, max_in_flight)
    return v[0] if single else v


# --- the bank -----------------------------------------------------------------


@dataclass
class FilterConfig:
    length_interval: tuple[float, float] = (0.5, 1.5)
    lexical_threshold: float = 0.3
    lexical_n: int = 5
    char_threshold: float = 0.2
    char_n: int = 10
    equilibrium_threshold: float = 0.30
    classifier_threshold: float = 0.5
    qe_threshold: float = 0.9
    disabled: frozenset = frozenset()
    classifier: ScorerBackend | None = None
    qe: ScorerBackend | None = None
    batch_size: int = 32
    max_in_flight: int = 1
    lexicons: LexiconSet | None = None

    def __post_init__(self):
        self.length_interval = tuple(self.length_interval)
        self.disabled = frozenset(self.disabled)
        unknown = self.disabled - set(FILTER_NAMES)
        if unknown:
            raise ConfigError(f"unknown filter names {sorted(unknown)}; known: {FILTER_NAMES}")
        lo, hi = self.length_interval
        if not 0 <= lo <= hi:
            raise ConfigError(f"length_interval must satisfy 0 <= lo <= hi, got {self.length_interval}")
        for name in ("lexical_threshold", "char_threshold", "equilibrium_threshold",
                     "classifier_threshold", "qe_threshold"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {v!r}")
        for name in ("lexical_n", "char_n", "batch_size", "max_in_flight"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def thresholds(self) -> dict:
        return {
            "length_ratio": list(self.length_interval),
            "lexical_repetition": self.lexical_threshold,
            "char_repetition": self.char_threshold,
            "codemix_equilibrium": self.equilibrium_threshold,
            "classifier": self.classifier_threshold,
            "qe": self.qe_threshold,
        }

    def active(self) -> list[str]:
        names = [n for n in HEURISTIC_FILTERS if n not in self.disabled]
        if "classifier" not in self.disabled and self.classifier is not None:
            names.append("classifier")
        if "qe" not in self.disabled and self.qe is not None:
            names.append("qe")
        return names


@dataclass
class FilterReport:
    n_input: int
    active_filters: list[str]
    rejected_by: dict[str, int]
    survived: dict[str, int]
    n_accepted: int
    n_rejected: int
    n_deferred: int
    elimination_rate: float | None
    thresholds: dict
    accepted: list[ParallelPair] = field(default_factory=list, repr=False)
    rejected: list[ParallelPair] = field(default_factory=list, repr=False)
    deferred: list[ParallelPair] = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "n_input": self.n_input,
            "active_filters": self.active_filters,
            "rejected_by": self.rejected_by,
            "survived": self.survived,
            "n_accepted": self.n_accepted,
            "n_rejected": self.n_rejected,
            "n_deferred": self.n_deferred,
            "elimination_rate": self.elimination_rate,
            "thresholds": self.thresholds,
        }


def _heuristic_verdicts(pair: ParallelPair, cfg: FilterConfig) -> list[FilterVerdict]:
    lex = cfg.lexicons
    checks = {
        "length_ratio": lambda: length_ratio_filter(pair, cfg.length_interval, lex),
        "lexical_repetition": lambda: lexical_repetition(pair, cfg.lexical_threshold, cfg.lexical_n, lex),
        "char_repetition": lambda: char_repetition(pair, cfg.char_threshold, cfg.char_n),
        "codemix_equilibrium": lambda: codemix_equilibrium(pair, cfg.equilibrium_threshold, lex),
    }
    out = []
    for name in HEURISTIC_FILTERS:
        if name in cfg.disabled:
            continue
        v = checks[name]()
        out.append(v)
        if not v.passed:
            break
    return out


def run_filter_bank(pairs: Iterable[ParallelPair], config: FilterConfig | None = None) -> FilterReport:
    """Run every active filter over ``pairs`` and tally the outcome.

    Existing verdicts on the pairs are replaced. Each pair ends up in exactly
    one of ``accepted``, ``rejected`` or ``deferred``, so the three counts
    always add up to ``n_input``.
    """
    cfg = config or FilterConfig()
    if cfg.lexicons is None:
        cfg = replace(cfg, lexicons=LexiconSet.default())
    pairs = list(pairs)
    active = cfg.active()
    rejected_by = {name: 0 for name in active}
    rejected, deferred = [], []

    alive = []
    for p in pairs:
        p.verdicts = _heuristic_verdicts(p, cfg)
        failing = p.failing_verdict
        if failing is None:
            alive.append(p)
        else:
            rejected_by[failing.filter_name] += 1
            rejected.append(p)
    survived = {"heuristics": len(alive)}

    for name, scorer, gate, threshold in (
        ("classifier", cfg.classifier, classifier_gate, cfg.classifier_threshold),
        ("qe", cfg.qe, qe_gate, cfg.qe_threshold),
    ):
        if name not in active:
            continue
        verdicts = gate(alive, scorer, threshold, cfg.batch_size, cfg.max_in_flight)
        nxt = []
        for p, v in zip(alive, verdicts):
            p.verdicts.append(v)
            if v.passed:
                nxt.append(p)
            elif v.deferred:
                deferred.append(p)
            else:
                rejected_by[name] += 1
                rejected.append(p)
        alive = nxt
        survived[name] = len(alive)

    for p in rejected:
        v = p.failing_verdict
        audit("pair_rejected", id=p.id, filter=v.filter_name, statistic=_json_float(v.statistic))
    for p in deferred:
        audit("pair_deferred", id=p.id, filter=p.failing_verdict.filter_name)
    n = len(pairs)
    return FilterReport(
        n_input=n,
        active_filters=active,
        rejected_by=rejected_by,
        survived=survived,
        n_accepted=len(alive),
        n_rejected=len(rejected),
        n_deferred=len(deferred),
        elimination_rate=len(rejected) / n if n else None,
        thresholds=cfg.thresholds(),
        accepted=alive,
        rejected=rejected,
        deferred=deferred,
    )


class FilterBank(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`run_filter_bank`.

    ``transform`` returns the accepted pairs and stores the full
    :class:`FilterReport` in ``report_``. Inputs may be :class:`ParallelPair`
    objects or dicts with ``id``, ``source_text`` and ``target_text``.
    """

    def __init__(
        self,
        length_interval=(0.5, 1.5),
        lexical_threshold=0.3,
        char_threshold=0.2,
        equilibrium_threshold=0.30,
        classifier_threshold=0.5,
        qe_threshold=0.9,
        classifier=None,
        qe=None,
        disabled=(),
        batch_size=32,
        lexicons=None,
    ):
        self.length_interval = length_interval
        self.lexical_threshold = lexical_threshold
        self.char_threshold = char_threshold
        self.equilibrium_threshold = equilibrium_threshold
        self.classifier_threshold = classifier_threshold
        self.qe_threshold = qe_threshold
        self.classifier = classifier
        self.qe = qe
        self.disabled = disabled
        self.batch_size = batch_size
        self.lexicons = lexicons

    def fit(self, X=None, y=None):
        self.config_ = FilterConfig(
            length_interval=self.length_interval,
            lexical_threshold=self.lexical_threshold,
            char_threshold=self.char_threshold,
            equilibrium_threshold=self.equilibrium_threshold,
            classifier_threshold=self.classifier_threshold,
            qe_threshold=self.qe_threshold,
            classifier=self.classifier,
            qe=self.qe,
            disabled=frozenset(self.disabled),
            batch_size=self.batch_size,
            lexicons=self.lexicons or LexiconSet.default(),
        )
        return self

    def transform(self, X):
        if not hasattr(self, "config_"):
            self.fit()
        self.report_ = run_filter_bank(check_pairs(X), self.config_)
        return self.report_.accepted
