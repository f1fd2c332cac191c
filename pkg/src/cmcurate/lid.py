"""Two-stage code-mixing identification.

Stage 1 is a cheap, high-recall check on tagged tokens: a post is a
candidate when it has at least one token of each language. Stage 2 asks an
odd-sized ensemble of external classifiers and takes the majority vote.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .backends import JsonBackend, MalformedResponse
from .errors import BackendError, EnsembleUnavailable
from .evalharness import PRF, prf_accuracy
from .textcore import LanguageTag, TaggedText, Token

logger = logging.getLogger(__name__)

__all__ = [
    "CODE_MIXED",
    "MONOLINGUAL",
    "ABSTAIN",
    "Vote",
    "LidDecision",
    "stage1_filter",
    "ensemble_classify",
    "evaluate_lid",
]

CODE_MIXED = "code_mixed"
MONOLINGUAL = "monolingual"
ABSTAIN = "abstain"
LABELS = (CODE_MIXED, MONOLINGUAL)


@dataclass(frozen=True)
class Vote:
    backend: str
    vote: str
    latency_ms: float
    error: str | None = None

    def to_dict(self):
        d = {"backend": self.backend, "vote": self.vote, "latency_ms": round(self.latency_ms, 3)}
        if self.error:
            d["error"] = self.error
        return d


@dataclass(frozen=True)
class LidDecision:
    record_id: str
    stage1_pass: bool
    ensemble_votes: tuple[Vote, ...] = field(default_factory=tuple)
    final: str | None = None
    rationale: str | None = None

    def to_dict(self):
        return {
            "record_id": self.record_id,
            "stage1_pass": self.stage1_pass,
            "ensemble_votes": [v.to_dict() for v in self.ensemble_votes],
            "final": self.final,
            "rationale": self.rationale,
        }


def stage1_filter(tagged: TaggedText | Sequence[Token]) -> bool:
    """True iff the text has at least one language-A and one language-B token."""
    tokens = tagged.tokens if isinstance(tagged, TaggedText) else tagged
    tags = {t.tag for t in tokens}
    return LanguageTag.LANG_A in tags and LanguageTag.LANG_B in tags


def _parse_label(resp: dict) -> str:
    label = resp.get("label")
    if isinstance(label, bool):
        return CODE_MIXED if label else MONOLINGUAL
    if isinstance(label, str) and label.strip().lower() in LABELS:
        return label.strip().lower()
    raise MalformedResponse(f"no valid 'label' in response {resp!r:.200}")


def _ask(backend: JsonBackend, record_id: str, text: str) -> Vote:
    t0 = time.perf_counter()
    try:
        resp = backend.request(text, record_id)
        vote = _parse_label(resp)
        err = None
    except MalformedResponse as e:
        logger.warning("backend %s: malformed response for %s: %s", backend.name, record_id, e)
        vote, err = ABSTAIN, f"malformed: {e}"
    except BackendError as e:
        vote, err = ABSTAIN, f"failed: {e}"
    return Vote(backend.name, vote, (time.perf_counter() - t0) * 1000, err)


def _majority(votes: Sequence[Vote]) -> tuple[str, str]:
    cm = sum(v.vote == CODE_MIXED for v in votes)
    mono = sum(v.vote == MONOLINGUAL for v in votes)
    if cm > mono:
        return CODE_MIXED, f"{cm}-{mono} majority"
    if mono > cm:
        return MONOLINGUAL, f"{mono}-{cm} majority"
    # Even split after abstentions: keep the record (recall-biased).
    return CODE_MIXED, f"{cm}-{mono} tie, resolved to {CODE_MIXED}"


def ensemble_classify(
    record,
    backends: Sequence[JsonBackend],
    stage1_pass: bool = True,
    force: bool = False,
    max_workers: int | None = None,
) -> LidDecision:
    """Majority vote over an odd number of backends.

    ``record`` is a :class:`~cmcurate.corpus.Post`, a dict with ``id``/``text``
    or a :class:`TaggedText`. Failed or malformed backend answers count as
    abstentions. Records that failed stage 1 are not sent unless ``force``.
    """
    if not backends or len(backends) % 2 == 0:
        raise ValueError(f"ensemble size must be odd, got {len(backends)}")
    record_id, text = _id_text(record)
    if not (stage1_pass or force):
        return LidDecision(record_id, False, (), None, "stage 1 rejected")

    workers = max_workers or len(backends)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            votes = list(pool.map(lambda b: _ask(b, record_id, text), backends))
    else:
        votes = [_ask(b, record_id, text) for b in backends]

    if all(v.vote == ABSTAIN for v in votes):
        raise EnsembleUnavailable(f"all {len(votes)} backends failed for record {record_id}")
    final, why = _majority(votes)
    return LidDecision(record_id, stage1_pass, tuple(votes), final, why)


def _id_text(record):
    if isinstance(record, TaggedText):
        return record.id, record.text
    if isinstance(record, dict):
        return str(record.get("id", "")), record["text"]
    return str(record.id), record.text


def _label_of(x) -> str:
    label = x.final if isinstance(x, LidDecision) else x
    if label not in LABELS:
        raise ValueError(f"invalid label {label!r}")
    return label


def evaluate_lid(
    predictions: Sequence[LidDecision] | Mapping[str, str],
    gold: Mapping[str, str],
) -> PRF:
    """Accuracy/precision/recall/F1 in percent, code-mixed as the positive class.

    ``predictions`` and ``gold`` are matched by record id. Predictions whose
    ``final`` is undefined (stage-1 rejects) count as monolingual.
    """
    if isinstance(predictions, Mapping):
        pred = dict(predictions)
    else:
        pred = {d.record_id: (d.final or MONOLINGUAL) for d in predictions}
    if not pred or not gold:
        raise ValueError("cannot evaluate an empty prediction or gold set")
    if set(pred) != set(gold):
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise ValueError(f"predictions and gold cover different ids, e.g. {missing}")
    tp = fp = fn = tn = 0
    for rid, g in gold.items():
        p, g = _label_of(pred[rid]), _label_of(g)
        if p == CODE_MIXED:
            tp += g == CODE_MIXED
            fp += g != CODE_MIXED
        else:
            fn += g == CODE_MIXED
            tn += g != CODE_MIXED
    return prf_accuracy(tp, fp, fn, tn)
