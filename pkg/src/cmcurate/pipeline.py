"""Three-stage augmentation: seed translation, iterative generation, final QA.

Stage 1 pairs each natural code-mixed post with a machine translation into the
embedded language, giving (synthetic source, natural target) seed pairs.

Stage 2 repeatedly translates a batch of monolingual source text into
code-mixed text, filters the output (heuristics, then the naturalness
classifier), keeps the survivors and asks the translator backend to retrain
on seed + survivors. Progress is checkpointed after every phase so an
interrupted run resumes to the same result.

Stage 3 applies the quality-estimation gate to everything stage 2 produced.

Model training is never done here: the translator exposes a ``retrain`` hook
that receives a dataset file and returns a new model tag.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

from .audit import audit
from .backends import JsonBackend, MalformedResponse
from .corpus import Post, read_jsonl, write_jsonl
from .errors import BackendError, ConfigError, DataError, PipelinePaused
from .filters import (
    FilterConfig,
    FilterReport,
    ParallelPair,
    ScorerBackend,
    classifier_gate,
    qe_gate,
    run_filter_bank,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Translator",
    "StubTranslator",
    "JsonTranslator",
    "HashScorer",
    "PipelineConfig",
    "IterationRecord",
    "Stage2Result",
    "stage1_seed",
    "stage2_iterate",
    "stage3_qa",
]

CHECKPOINT_VERSION = 1
PHASES = ("start", "translated", "heuristics", "classifier", "accumulated")


class Translator(Protocol):
    def translate(self, text: str, model_tag: str, record_id: str = "") -> str:
        """Return a translation or raise :class:`BackendError`."""

    def retrain(self, dataset_path: Path, model_tag: str) -> str:
        """Train on the JSONL pairs at ``dataset_path``; return the new model tag."""


def _h(*parts) -> int:
    return int.from_bytes(hashlib.sha256("\x1f".join(map(str, parts)).encode()).digest()[:8], "big")


_VI_FILLER = (
    "mình", "đi", "nhé", "rồi", "cái", "này", "thì", "là", "của", "với",
    "không", "được", "quá", "luôn", "nha", "bạn", "mọi", "người", "hôm", "nay",
)


class StubTranslator:
    """Deterministic offline translator for dry runs and tests.

    Each word is replaced by a Vietnamese filler word unless a hash of
    ``(word, model_tag)`` keeps it, so outputs are code-mixed and change with
    the model tag. ``fail_ids`` makes ``translate`` raise for those record ids;
    ``fail_retrain`` makes ``retrain`` raise.
    """

    def __init__(self, keep_rate: float = 0.25, fail_ids=(), fail_retrain: bool = False, reverse: bool = False):
        self.keep_rate = keep_rate
        self.fail_ids = set(fail_ids)
        self.fail_retrain = fail_retrain
        self.reverse = reverse
        self.retrain_calls = []

    def translate(self, text, model_tag, record_id=""):
        if record_id in self.fail_ids:
            raise BackendError(f"stub translator refuses {record_id}")
        words = text.split()
        if self.reverse:
            return " ".join(reversed(words))
        out = []
        for w in words:
            if _h(w, model_tag) % 1000 < self.keep_rate * 1000:
                out.append(w)
            else:
                out.append(_VI_FILLER[_h(w, model_tag, "vi") % len(_VI_FILLER)])
        return " ".join(out)

    def retrain(self, dataset_path, model_tag):
        if self.fail_retrain:
            raise BackendError("stub retrain failure")
        with open(dataset_path, "rb") as f:
            digest = hashlib.sha256(f.read()).hexdigest()[:12]
        self.retrain_calls.append(str(dataset_path))
        return f"{model_tag}+{digest}"


class JsonTranslator:
    """Translator backed by JSON backends.

    ``translate`` sends ``{"text", "model_tag"}`` and expects
    ``{"translation": str}``; ``retrain`` sends ``{"dataset_path", "model_tag"}``
    to ``retrain_backend`` and expects ``{"model_tag": str}``.
    """

    def __init__(self, backend: JsonBackend, retrain_backend: JsonBackend | None = None):
        self.backend = backend
        self.retrain_backend = retrain_backend

    def translate(self, text, model_tag, record_id=""):
        resp = self.backend.request(text, record_id, model_tag=model_tag)
        out = resp.get("translation")
        if not isinstance(out, str) or not out.strip():
            raise MalformedResponse(f"{self.backend.name}: no translation in {resp!r:.200}")
        return out

    def retrain(self, dataset_path, model_tag):
        if self.retrain_backend is None:
            return model_tag
        resp = self.retrain_backend.request("", "retrain", dataset_path=str(dataset_path), model_tag=model_tag)
        tag = resp.get("model_tag")
        if not isinstance(tag, str) or not tag:
            raise MalformedResponse(f"{self.retrain_backend.name}: no model_tag in {resp!r:.200}")
        return tag


class HashScorer:
    """Deterministic pseudo-scores in ``[low, high]`` from a hash of the pair."""

    def __init__(self, low: float = 0.0, high: float = 1.0, salt: str = ""):
        self.low, self.high, self.salt = low, high, salt

    def score_batch(self, pairs):
        return [
            self.low + (self.high - self.low) * (_h(self.salt, p.id, p.target_text) % 10_000) / 9_999
            for p in pairs
        ]


@dataclass
class PipelineConfig:
    iteration_count: int = 4
    batch_size: int | None = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    checkpoint_dir: Path | None = None
    base_model_tag: str = "base"

    def __post_init__(self):
        if self.iteration_count < 1:
            raise ConfigError("iteration_count must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


@dataclass
class IterationRecord:
    iteration: int
    generated: int = 0
    survived_heuristics: int = 0
    survived_classifier: int = 0
    survived_qe: int | None = None
    model_tag: str = ""

    def check(self):
        chain = [self.generated, self.survived_heuristics, self.survived_classifier]
        if self.survived_qe is not None:
            chain.append(self.survived_qe)
        if any(a < b for a, b in zip(chain, chain[1:])):
            raise AssertionError(f"iteration {self.iteration}: counts not monotone: {chain}")
        return True

    def to_dict(self):
        return asdict(self)


@dataclass
class Stage2Result:
    pairs: list[ParallelPair]
    records: list[IterationRecord]
    model_tag: str
    deferred: list[ParallelPair] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)


# --- stage 1 --------------------------------------------------------------------


def _post(r) -> Post:
    return r if isinstance(r, Post) else Post.from_record(r)


def stage1_seed(natural_cm: Sequence, translator: Translator, model_tag: str = "seed") -> tuple[list[ParallelPair], list[dict]]:
    """Translate natural code-mixed posts into seed pairs.

    Returns ``(pairs, audit_entries)``. A record whose translation fails is
    skipped with an audit entry; it never gets an empty source side.
    Discarded-PII posts are skipped the same way.
    """
    posts = [_post(r) for r in natural_cm]
    if not posts:
        logger.warning("stage 1: empty seed corpus")
    pairs, entries = [], []
    for p in posts:
        if p.pii_status == "discarded" or p.text is None:
            entries.append({"id": p.id, "stage": "seed", "reason": "pii_discarded"})
            audit("seed_skipped", id=p.id, reason="pii_discarded")
            continue
        try:
            src = translator.translate(p.text, model_tag, p.id)
        except BackendError as e:
            entries.append({"id": p.id, "stage": "seed", "reason": f"translation_failed: {e}"})
            audit("seed_skipped", id=p.id, reason="translation_failed")
            continue
        if not src or not src.strip():
            entries.append({"id": p.id, "stage": "seed", "reason": "empty_translation"})
            audit("seed_skipped", id=p.id, reason="empty_translation")
            continue
        pairs.append(ParallelPair(p.id, src, p.text, meta={"origin": "seed"}))
    return pairs, entries


# --- checkpointing --------------------------------------------------------------


class _Checkpoint:
    """Files: manifest.json, seed.jsonl, accumulated.jsonl, batch.jsonl, deferred.jsonl."""

    def __init__(self, root: Path | None):
        self.root = Path(root) if root is not None else None

    def path(self, name):
        return self.root / name

    @property
    def enabled(self):
        return self.root is not None

    def exists(self):
        return self.enabled and self.path("manifest.json").exists()

    def save(self, state: dict, **files):
        if not self.enabled:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        for name, pairs in files.items():
            write_jsonl(pairs, self.path(f"{name}.jsonl"))
        tmp = self.path("manifest.json.tmp")
        tmp.write_text(json.dumps(state, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp, self.path("manifest.json"))

    def load(self) -> dict:
        try:
            state = json.loads(self.path("manifest.json").read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read checkpoint manifest in {self.root}: {e}") from None
        if state.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {state.get('version')!r}")
        return state

    def pairs(self, name) -> list[ParallelPair]:
        p = self.path(f"{name}.jsonl")
        if not p.exists():
            return []
        records, _ = read_jsonl(p, max_error_fraction=0.0)
        return [ParallelPair.from_record(r) for r in records]


def _source_records(source_corpus) -> list[tuple[str, str]]:
    out = []
    for r in source_corpus:
        p = _post(r)
        if p.pii_status == "discarded" or p.text is None:
            continue
        out.append((p.id, p.text))
    return out


# --- stage 2 --------------------------------------------------------------------


def stage2_iterate(
    source_corpus: Sequence,
    translator: Translator,
    config: PipelineConfig,
    seed_pairs: Sequence[ParallelPair] = (),
    resume: bool = False,
) -> Stage2Result:
    """Iterative translate -> filter -> accumulate -> retrain loop.

    With ``config.checkpoint_dir`` set, state is saved after every phase; pass
    ``resume=True`` to continue from the saved state. A failing retrain hook
    raises :class:`PipelinePaused` after checkpointing.
    """
    ckpt = _Checkpoint(config.checkpoint_dir)
    sources = _source_records(source_corpus)
    heur_cfg = replace(config.filters, classifier=None, qe=None)

    if resume:
        if not ckpt.exists():
            raise DataError(f"no checkpoint to resume in {config.checkpoint_dir}")
        state = ckpt.load()
        seed = ckpt.pairs("seed")
        accumulated = ckpt.pairs("accumulated")
        batch = ckpt.pairs("batch")
        deferred = ckpt.pairs("deferred")
        records = [IterationRecord(**r) for r in state["records"]]
        logger.info("resuming at iteration %d, phase %s", state["iteration"], state["phase"])
    else:
        seed = list(seed_pairs)
        accumulated, batch, deferred, records = [], [], [], []
        state = {
            "version": CHECKPOINT_VERSION,
            "iteration": 1,
            "phase": "start",
            "cursor": 0,
            "model_tag": config.base_model_tag,
            "iteration_count": config.iteration_count,
            "records": [],
        }
        ckpt.save(state, seed=seed, accumulated=[], batch=[], deferred=[])
    audit_entries = []

    def save(**files):
        state["records"] = [r.to_dict() for r in records]
        ckpt.save(state, **files)

    while state["iteration"] <= config.iteration_count:
        it = state["iteration"]
        phase = state["phase"]
        if phase == "start":
            remaining = len(sources) - state["cursor"]
            left = config.iteration_count - it + 1
            size = (config.batch_size or math.ceil(remaining / left)) if remaining > 0 else 0
            chunk = sources[state["cursor"] : state["cursor"] + size]
            batch = []
            for sid, text in chunk:
                try:
                    out = translator.translate(text, state["model_tag"], sid)
                except BackendError as e:
                    audit_entries.append({"id": sid, "stage": f"iter{it}", "reason": f"translation_failed: {e}"})
                    audit("generation_skipped", id=sid, iteration=it)
                    continue
                if not out or not out.strip():
                    audit_entries.append({"id": sid, "stage": f"iter{it}", "reason": "empty_translation"})
                    continue
                batch.append(ParallelPair(f"{sid}@it{it}", text, out, meta={"iteration": it, "source_id": sid}))
            records.append(IterationRecord(it, generated=len(batch), model_tag=state["model_tag"]))
            state.update(phase="translated", cursor=state["cursor"] + len(chunk))
            save(batch=batch)
        elif phase == "translated":
            report = run_filter_bank(batch, heur_cfg)
            batch = report.accepted
            records[-1].survived_heuristics = len(batch)
            records[-1].survived_classifier = len(batch)
            state["phase"] = "heuristics"
            save(batch=batch)
        elif phase == "heuristics":
            cfg = config.filters
            if cfg.classifier is not None and "classifier" not in cfg.disabled:
                verdicts = classifier_gate(batch, cfg.classifier, cfg.classifier_threshold,
                                           cfg.batch_size, cfg.max_in_flight)
                kept = []
                for p, v in zip(batch, verdicts):
                    p.verdicts.append(v)
                    if v.passed:
                        kept.append(p)
                    elif v.deferred:
                        deferred.append(p)
                        audit("pair_deferred", id=p.id, filter="classifier")
                    else:
                        audit("pair_rejected", id=p.id, filter="classifier", statistic=v.statistic)
                batch = kept
            records[-1].survived_classifier = len(batch)
            state["phase"] = "classifier"
            save(batch=batch, deferred=deferred)
        elif phase == "classifier":
            accumulated.extend(batch)
            state["phase"] = "accumulated"
            save(accumulated=accumulated, batch=[])
            batch = []
        elif phase == "accumulated":
            with tempfile.TemporaryDirectory() as tmp:
                root = ckpt.root if ckpt.enabled else Path(tmp)
                dataset = root / f"retrain_it{it}.jsonl"
                write_jsonl(list(seed) + accumulated, dataset)
                try:
                    new_tag = translator.retrain(dataset, state["model_tag"])
                except BackendError as e:
                    raise PipelinePaused(
                        f"retrain hook failed after iteration {it}: {e}", config.checkpoint_dir
                    ) from e
            audit("retrained", iteration=it, model_tag=new_tag)
            state.update(iteration=it + 1, phase="start", model_tag=new_tag)
            save()
        else:
            raise DataError(f"unknown checkpoint phase {phase!r}")

    for r in records:
        r.check()
    return Stage2Result(accumulated, records, state["model_tag"], deferred, audit_entries)


# --- stage 3 --------------------------------------------------------------------


def stage3_qa(
    pairs: Sequence[ParallelPair],
    qe_scorer: ScorerBackend,
    threshold: float = 0.9,
    batch_size: int = 32,
    records: Sequence[IterationRecord] | None = None,
) -> tuple[list[ParallelPair], FilterReport]:
    """Keep pairs whose quality estimate is at least ``threshold``.

    When ``records`` is given, each record's ``survived_qe`` is filled from
    the survivors' ``iteration`` metadata.
    """
    pairs = list(pairs)
    verdicts = qe_gate(pairs, qe_scorer, threshold, batch_size)
    final, rejected, deferred = [], [], []
    for p, v in zip(pairs, verdicts):
        p.verdicts.append(v)
        (final if v.passed else deferred if v.deferred else rejected).append(p)
    for p in rejected:
        audit("pair_rejected", id=p.id, filter="qe", statistic=p.quality_score)
    if not final:
        logger.warning("stage 3: no pair reached quality %.2f; final corpus is EMPTY (%d candidates)",
                       threshold, len(pairs))
    if records is not None:
        by_iter = {}
        for p in final:
            by_iter[p.meta.get("iteration")] = by_iter.get(p.meta.get("iteration"), 0) + 1
        for r in records:
            r.survived_qe = by_iter.get(r.iteration, 0)
            r.check()
    n = len(pairs)
    report = FilterReport(
        n_input=n,
        active_filters=["qe"],
        rejected_by={"qe": len(rejected)},
        survived={"qe": len(final)},
        n_accepted=len(final),
        n_rejected=len(rejected),
        n_deferred=len(deferred),
        elimination_rate=len(rejected) / n if n else None,
        thresholds={"qe": threshold},
        accepted=final,
        rejected=rejected,
        deferred=deferred,
    )
    return final, report
