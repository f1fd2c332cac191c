"""Code-mixing statistics: Code-Mixing Index (CMI) and Switching Point Frequency (SPF)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .textcore import LanguageTag, TaggedText, Token

__all__ = ["MixStats", "cmi", "spf", "sentence_stats", "corpus_stats", "MixStatsTransformer"]


@dataclass(frozen=True)
class MixStats:
    cmi: float
    spf: float
    n_tokens: int
    n_langA: int
    n_langB: int
    n_neutral: int
    n_switch_points: int

    def to_dict(self):
        return asdict(self)


def _tags(tagged) -> list[LanguageTag]:
    out = []
    for t in tagged:
        tag = t.tag if isinstance(t, Token) else LanguageTag(t)
        if tag is None:
            raise ValueError(f"untagged token {t.surface!r}")
        out.append(tag)
    return out


def _counts(tags):
    n_a = sum(1 for t in tags if t is LanguageTag.LANG_A)
    n_b = sum(1 for t in tags if t is LanguageTag.LANG_B)
    return n_a, n_b, len(tags) - n_a - n_b


def _switches(tags):
    lang = [t for t in tags if t is not LanguageTag.NEUTRAL]
    return sum(1 for x, y in zip(lang, lang[1:]) if x is not y), max(len(lang) - 1, 0)


def cmi(tagged: Sequence[Token | str]) -> float:
    """Sentence-level Code-Mixing Index in [0, 100].

    ``100 * (1 - max(n_A, n_B) / (n - u))`` with ``u`` the neutral count; 0 when
    no token carries a language. Accepts tagged tokens or raw tag values.
    """
    n_a, n_b, n_u = _counts(_tags(tagged))
    lang = n_a + n_b
    if lang == 0:
        return 0.0
    return 100.0 * (1.0 - max(n_a, n_b) / lang)


def spf(tagged: Sequence[Token | str]) -> float:
    """Fraction of boundaries between consecutive language tokens that switch.

    Neutral tokens are skipped, so they neither create nor hide a switch.
    """
    switches, boundaries = _switches(_tags(tagged))
    return switches / boundaries if boundaries else 0.0


def sentence_stats(tagged: Sequence[Token | str]) -> MixStats:
    tags = _tags(tagged)
    n_a, n_b, n_u = _counts(tags)
    switches, _ = _switches(tags)
    return MixStats(
        cmi=cmi(tags),
        spf=spf(tags),
        n_tokens=len(tags),
        n_langA=n_a,
        n_langB=n_b,
        n_neutral=n_u,
        n_switch_points=switches,
    )


def corpus_stats(corpus: Iterable[TaggedText | Sequence[Token]]) -> MixStats:
    """Macro-averaged CMI/SPF over records; token and switch counts are summed."""
    per_record = [
        sentence_stats(r.tokens if isinstance(r, TaggedText) else r) for r in corpus
    ]
    if not per_record:
        raise ValueError("corpus_stats of an empty corpus is undefined")
    n = len(per_record)
    return MixStats(
        cmi=sum(s.cmi for s in per_record) / n,
        spf=sum(s.spf for s in per_record) / n,
        n_tokens=sum(s.n_tokens for s in per_record),
        n_langA=sum(s.n_langA for s in per_record),
        n_langB=sum(s.n_langB for s in per_record),
        n_neutral=sum(s.n_neutral for s in per_record),
        n_switch_points=sum(s.n_switch_points for s in per_record),
    )


class MixStatsTransformer(TransformerMixin, BaseEstimator):
    """Map tagged token sequences to ``[cmi, spf, n_tokens]`` feature rows.

    Stateless; ``fit`` only exists for pipeline compatibility.
    """

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        rows = []
        for tokens in X:
            s = sentence_stats(tokens)
            rows.append((s.cmi, s.spf, s.n_tokens))
        return np.asarray(rows, dtype=float).reshape(-1, 3)
