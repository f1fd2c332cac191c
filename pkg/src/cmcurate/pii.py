"""PII detection and redaction.

Default patterns cover phone numbers, email addresses and account numbers
introduced by an account keyword. A record is *discarded* instead of redacted
when redaction would not be clean:

* a digit run of 5 or more survives next to a redacted span (inside the same
  whitespace-delimited chunk), e.g. a phone number glued to more digits, or
* the record holds more than ``max_findings`` findings.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError

logger = logging.getLogger(__name__)

__all__ = [
    "PII_KINDS",
    "PLACEHOLDERS",
    "PiiPattern",
    "PiiFinding",
    "RedactionResult",
    "DEFAULT_PATTERNS",
    "load_patterns",
    "scan",
    "redact",
    "PiiRedactor",
]

PII_KINDS = ("phone", "email", "account_number", "other")
PLACEHOLDERS = {
    "phone": "[PHONE]",
    "email": "[EMAIL]",
    "account_number": "[ACCT]",
    "other": "[PII]",
}
MAX_FINDINGS = 3
RESIDUAL_DIGITS = 5


@dataclass(frozen=True)
class PiiPattern:
    kind: str
    regex: re.Pattern
    group: int = 0

    def __post_init__(self):
        if self.kind not in PII_KINDS:
            raise ConfigError(f"unknown PII kind {self.kind!r}")


@dataclass(frozen=True)
class PiiFinding:
    kind: str
    span: tuple[int, int]
    replacement: str

    def to_dict(self):
        return {"kind": self.kind, "span": list(self.span), "replacement": self.replacement}


@dataclass(frozen=True)
class RedactionResult:
    """Outcome of :func:`redact`. ``text`` is ``None`` when discarded."""

    status: str  # clean | redacted | discarded
    text: str | None
    reason: str | None = None
    findings: tuple[PiiFinding, ...] = field(default_factory=tuple)

    @property
    def discarded(self):
        return self.status == "discarded"


_ACCOUNT_KEYWORDS = (
    r"số\s+tài\s+khoản|so\s+tai\s+khoan|tài\s+khoản|tai\s+khoan|stk|"
    r"account(?:\s+(?:number|no\.?))?|acct|a/c|iban"
)

DEFAULT_PATTERNS = (
    PiiPattern(
        "email",
        re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}"),
    ),
    PiiPattern(
        "account_number",
        re.compile(
            rf"(?i:\b(?:{_ACCOUNT_KEYWORDS}))\s*[:#.\-]?\s*(\d(?:[ \-]?\d){{8,}})(?!\d)"
        ),
        group=1,
    ),
    # 7-12 digits, optional leading +, single space/dot/dash/paren separators.
    # Dates and thousands-grouped amounts (1.500.000) are not phones.
    PiiPattern(
        "phone",
        re.compile(
            r"(?<![\d+])"
            r"(?!\d{1,4}[./-]\d{1,2}[./-]\d{1,4}(?!\d))"
            r"(?!\d{1,3}(?:[.,]\d{3})+(?!\d))"
            r"\+?\(?\d(?:[ .\-()]?\d){6,11}(?!\d)"
        ),
    ),
)


def load_patterns(path) -> tuple[PiiPattern, ...]:
    """Read a pattern file: one ``<kind><TAB or space><regex>`` per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    patterns = []
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read pattern file {path}: {e}") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected '<kind> <regex>'")
        kind, expr = parts
        try:
            rx = re.compile(expr)
        except re.error as e:
            raise ConfigError(f"{path}:{lineno}: bad regex: {e}") from None
        patterns.append(PiiPattern(kind, rx))
    return tuple(patterns)


def scan(text: str, patterns: Sequence[PiiPattern] = DEFAULT_PATTERNS) -> list[PiiFinding]:
    """Find PII spans; overlapping candidates resolve longest-match-first.

    Equal-length overlaps go to the pattern listed first.
    """
    candidates = []
    for order, pat in enumerate(patterns):
        for m in pat.regex.finditer(text):
            start, end = m.span(pat.group)
            if start < end:
                candidates.append((start, end, order, pat.kind))
    # Longest first, then earliest, then pattern order.
    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0], c[2]))
    chosen = []
    for start, end, _, kind in candidates:
        if all(end <= s or start >= e for s, e, _ in chosen):
            chosen.append((start, end, kind))
    chosen.sort()
    return [PiiFinding(kind, (s, e), PLACEHOLDERS[kind]) for s, e, kind in chosen]


_DIGIT_RUN = re.compile(r"\d{%d,}" % RESIDUAL_DIGITS)


def _residual_digits(text: str, span: tuple[int, int]) -> bool:
    start, end = span
    left = start
    while left > 0 and not text[left - 1].isspace():
        left -= 1
    right = end
    while right < len(text) and not text[right].isspace():
        right += 1
    return bool(_DIGIT_RUN.search(text[left:start]) or _DIGIT_RUN.search(text[end:right]))


def redact(
    text: str,
    findings: Sequence[PiiFinding],
    policy: str = "redact",
    max_findings: int = MAX_FINDINGS,
) -> RedactionResult:
    """Replace each finding with its placeholder, or discard the record.

    ``policy="discard-all"`` discards any record with at least one finding.
    Bytes outside finding spans are never modified.
    """
    if policy not in ("redact", "discard-all"):
        raise ConfigError(f"unknown PII policy {policy!r}")
    findings = tuple(sorted(findings, key=lambda f: f.span))
    if not findings:
        return RedactionResult("clean", text)
    if policy == "discard-all":
        return RedactionResult("discarded", None, "policy discard-all", findings)
    if len(findings) > max_findings:
        return RedactionResult(
            "discarded", None, f"{len(findings)} findings > {max_findings}", findings
        )
    for f in findings:
        if _residual_digits(text, f.span):
            return RedactionResult(
                "discarded", None, f"residual digits next to {f.kind} at {f.span[0]}", findings
            )
    parts = []
    pos = 0
    for f in findings:
        start, end = f.span
        if start < pos:
            raise ValueError("findings overlap")
        parts.append(text[pos:start])
        parts.append(f.replacement)
        pos = end
    parts.append(text[pos:])
    return RedactionResult("redacted", "".join(parts), None, findings)


class PiiRedactor(TransformerMixin, BaseEstimator):
    """Redact PII from strings; ``transform`` returns :class:`RedactionResult` objects.

    Parameters
    ----------
    patterns : path or None
        Extra pattern file (see :func:`load_patterns`), used in addition to
        the defaults.
    policy : {"redact", "discard-all"}
    max_findings : int
    """

    def __init__(self, patterns=None, policy="redact", max_findings=MAX_FINDINGS):
        self.patterns = patterns
        self.policy = policy
        self.max_findings = max_findings

    def fit(self, X=None, y=None):
        if self.policy not in ("redact", "discard-all"):
            raise ConfigError(f"unknown PII policy {self.policy!r}")
        extra = load_patterns(self.patterns) if self.patterns else ()
        self.patterns_ = DEFAULT_PATTERNS + extra
        return self

    def transform(self, X):
        if not hasattr(self, "patterns_"):
            self.fit()
        return [
            redact(t, scan(t, self.patterns_), self.policy, self.max_findings) for t in X
        ]
