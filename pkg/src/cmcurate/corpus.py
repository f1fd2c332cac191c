"""Corpus records, JSONL I/O, seeded splits and the raw-post prefilter.

JSONL is read and written as UTF-8, one JSON object per line. Output is
canonical (sorted keys, no ASCII escaping, compact separators) so that the
same records always produce the same bytes.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .textcore import LanguageTag, LexiconSet, tag_tokens, tokenize

logger = logging.getLogger(__name__)

__all__ = [
    "PII_STATUSES",
    "Post",
    "SplitSpec",
    "MqmRating",
    "LineError",
    "JsonlRead",
    "read_jsonl",
    "write_jsonl",
    "dumps_record",
    "split",
    "split_sizes",
    "prefilter_reason",
    "heuristic_prefilter",
]

PII_STATUSES = ("clean", "redacted", "discarded")


@dataclass
class Post:
    id: str
    text: str | None
    platform: str = ""
    collected_at: str | None = None
    pii_status: str = "clean"
    lid: dict | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pii_status not in PII_STATUSES:
            raise ValueError(f"pii_status must be one of {PII_STATUSES}, got {self.pii_status!r}")

    @classmethod
    def from_record(cls, rec: dict, text_field: str = "text") -> "Post":
        if "id" not in rec:
            raise DataError("record has no 'id' field")
        known = {f.name for f in fields(cls)} - {"extra", "text"}
        extra = {k: v for k, v in rec.items() if k not in known and k != text_field}
        return cls(
            id=str(rec["id"]),
            text=rec.get(text_field),
            platform=rec.get("platform", ""),
            collected_at=rec.get("collected_at"),
            pii_status=rec.get("pii_status", "clean"),
            lid=rec.get("lid"),
            extra=extra,
        )

    def to_record(self) -> dict:
        rec = dict(self.extra)
        rec.update(
            id=self.id,
            text=self.text,
            platform=self.platform,
            collected_at=self.collected_at,
            pii_status=self.pii_status,
        )
        if self.lid is not None:
            rec["lid"] = self.lid
        return rec


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.dev_fraction, self.test_fraction)
        if not all(0 < f < 1 for f in fr):
            raise ValueError(f"split fractions must lie in (0, 1), got {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fr)!r}")


MQM_DIMENSIONS = (
    "terminology",
    "accuracy",
    "linguistic_conventions",
    "style",
    "locale_conventions",
    "audience_appropriateness",
)


@dataclass(frozen=True)
class MqmRating:
    """Six-dimension translator rating, each on a 1-5 scale (5 best)."""

    terminology: int
    accuracy: int
    linguistic_conventions: int
    style: int
    locale_conventions: int
    audience_appropriateness: int

    def __post_init__(self):
        for name in MQM_DIMENSIONS:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 1 <= v <= 5:
                raise ValueError(f"MQM score {name}={v!r} is not an integer in 1..5")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MqmRating":
        unknown = set(d) - set(MQM_DIMENSIONS)
        if unknown:
            raise ValueError(f"unknown MQM dimensions {sorted(unknown)}")
        return cls(**d)


class LineError(NamedTuple):
    lineno: int
    message: str


class JsonlRead(NamedTuple):
    records: list[dict]
    errors: list[LineError]


def read_jsonl(path, max_error_fraction: float = 0.05) -> JsonlRead:
    """Read a JSONL file, collecting malformed lines instead of dropping them silently.

    Blank lines are skipped. Raises :class:`DataError` if the file cannot be
    read or more than ``max_error_fraction`` of the non-blank lines are bad.
    """
    records, errors = [], []
    n_lines = 0
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from None
    with f:
        try:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                n_lines += 1
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    errors.append(LineError(lineno, str(e)))
                    continue
                if not isinstance(obj, dict):
                    errors.append(LineError(lineno, f"expected an object, got {type(obj).__name__}"))
                    continue
                records.append(obj)
        except UnicodeDecodeError as e:
            raise DataError(f"{path} is not valid UTF-8: {e}") from None
    for err in errors:
        logger.warning("%s:%d: malformed line: %s", path, err.lineno, err.message)
    if n_lines and len(errors) / n_lines > max_error_fraction:
        raise DataError(
            f"{path}: {len(errors)} of {n_lines} lines malformed "
            f"(limit {max_error_fraction:.0%})"
        )
    return JsonlRead(records, errors)


def _as_record(r: Any) -> dict:
    if isinstance(r, dict):
        return r
    for attr in ("to_record", "to_dict"):
        if hasattr(r, attr):
            return getattr(r, attr)()
    raise TypeError(f"cannot serialize {type(r).__name__} as a JSONL record")


def dumps_record(r: Any) -> str:
    return json.dumps(_as_record(r), ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_jsonl(records: Iterable[Any], path) -> int:
    """Write records atomically (temp file + rename); returns the count written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    n = 0
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            for r in records:
                f.write(dumps_record(r))
                f.write("\n")
                n += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return n


def _pii_status(p) -> str:
    if isinstance(p, Post):
        return p.pii_status
    if isinstance(p, dict):
        return p.get("pii_status", "clean")
    return getattr(p, "pii_status", "clean")


def split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """Dev/test sizes are rounded (half up); train takes the remainder."""
    dev = math.floor(n * spec.dev_fraction + 0.5)
    test = math.floor(n * spec.test_fraction + 0.5)
    return n - dev - test, dev, test


def split(posts: Sequence, spec: SplitSpec) -> dict[str, list]:
    """Deterministic train/dev/test partition.

    Indices are shuffled with ``numpy.random.Generator(PCG64(seed)).permutation``;
    the first block of the permutation goes to train, then dev, then test.
    Each split keeps the input order of its members.
    """
    if not posts:
        raise ValueError("cannot split an empty corpus")
    bad = [i for i, p in enumerate(posts) if _pii_status(p) == "discarded"]
    if bad:
        raise DataError(f"{len(bad)} discarded posts passed to split (first at index {bad[0]})")
    n = len(posts)
    n_train, n_dev, _ = split_sizes(n, spec)
    perm = np.random.Generator(np.random.PCG64(spec.seed)).permutation(n)
    blocks = {
        "train": perm[:n_train],
        "dev": perm[n_train : n_train + n_dev],
        "test": perm[n_train + n_dev :],
    }
    return {name: [posts[i] for i in sorted(idx.tolist())] for name, idx in blocks.items()}


def prefilter_reason(text: str, lexicons: LexiconSet, min_words: int = 11) -> str | None:
    """Why a raw post should be dropped, or ``None`` to keep it.

    Words are non-neutral tokens, so emoji and punctuation do not count.
    """
    tokens = tag_tokens(tokenize(text or ""), lexicons)
    if any(t.kind == "url" for t in tokens):
        return "contains_link"
    if tokens and all(t.kind in ("emoji", "punct") for t in tokens):
        return "only_symbols"
    n_words = sum(1 for t in tokens if t.tag is not LanguageTag.NEUTRAL)
    if n_words < min_words:
        return "too_short"
    return None


def heuristic_prefilter(posts: Iterable, lexicons: LexiconSet, min_words: int = 11) -> list:
    """Keep posts with more than 10 words, no links and some non-symbol content."""
    kept = []
    for p in posts:
        text = p.text if isinstance(p, Post) else p["text"] if isinstance(p, dict) else p
        reason = prefilter_reason(text, lexicons, min_words)
        if reason is None:
            kept.append(p)
        else:
            logger.debug("prefilter drop %s: %s", getattr(p, "id", None), reason)
    return kept
