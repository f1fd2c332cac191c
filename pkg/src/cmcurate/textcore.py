"""Tokenization and per-token language tagging for Vietnamese-English text.

Tokens are tagged with one of three classes: the matrix language (``A``,
Vietnamese), the embedded language (``B``, English) or ``N`` for tokens that
carry no language (numbers, punctuation, emoji, URLs, named entities).

Spans are Python string offsets (code points), so ``text[start:end]`` is the
token surface.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import regex
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigError

__all__ = [
    "LanguageTag",
    "Token",
    "TaggedText",
    "LexiconSet",
    "tokenize",
    "tag_tokens",
    "tag_text",
    "has_vietnamese_char",
    "CodeMixTagger",
]


class LanguageTag(str, Enum):
    LANG_A = "A"
    LANG_B = "B"
    NEUTRAL = "N"

    def __str__(self):
        return self.value


# Alternation order matters: earlier groups win at the same start position.
_TOKEN_RE = regex.compile(
    r"""
      (?P<url>(?:https?://|www\.)\S*[^\s.,!?;:)\]'"])
    | (?P<email>[\w.+-]+@[\w-]+(?:\.[\w-]+)+)
    | (?P<placeholder>\[(?:PHONE|EMAIL|ACCT|PII)\])
    | (?P<mention>(?<![\w])@\w+)
    | (?P<number>\d+(?:[.,:/]\d+)*%?(?![\p{L}\p{M}\p{N}]))
    | (?P<word>[\p{L}\p{M}\p{N}]+(?:['’\-][\p{L}\p{M}\p{N}]+)*)
    | (?P<emoji>
          \p{RI}\p{RI}
        | \p{Extended_Pictographic}[\p{EMod}\uFE0F\u20E3]*
          (?:\u200D\p{Extended_Pictographic}[\p{EMod}\uFE0F]*)*
      )
    | (?P<punct>[^\s\p{L}\p{M}\p{N}\p{Extended_Pictographic}\p{RI}]+)
    """,
    regex.VERBOSE,
)

NEUTRAL_KINDS = frozenset({"url", "email", "placeholder", "mention", "number", "emoji", "punct"})

# Combining marks used by Vietnamese orthography: five tones plus circumflex,
# breve and horn.
_VI_MARKS = frozenset("\u0300\u0301\u0303\u0309\u0323\u0302\u0306\u031b")
_VI_VOWELS = frozenset("aeiouyAEIOUY")


@dataclass(frozen=True)
class Token:
    surface: str
    span: tuple[int, int]
    tag: LanguageTag | None = None
    kind: str = "word"

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")
        start, end = self.span
        if not 0 <= start < end:
            raise ValueError(f"invalid span {self.span!r}")

    def to_dict(self):
        return {
            "surface": self.surface,
            "span": list(self.span),
            "tag": None if self.tag is None else self.tag.value,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d):
        tag = d.get("tag")
        return cls(
            surface=d["surface"],
            span=tuple(d["span"]),
            tag=None if tag is None else LanguageTag(tag),
            kind=d.get("kind", "word"),
        )


@dataclass(frozen=True)
class TaggedText:
    """A text record together with its tagged tokens."""

    id: str
    text: str
    tokens: tuple[Token, ...] = field(default_factory=tuple)

    @property
    def tags(self):
        return [t.tag for t in self.tokens]


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into tokens on whitespace and punctuation.

    URLs, emails, @mentions, redaction placeholders and emoji sequences are
    kept whole. Runs of punctuation become one token.

    >>> [t.surface for t in tokenize("q2 rồi, muzik!")]
    ['q2', 'rồi', ',', 'muzik', '!']
    """
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(Token(surface=m.group(), span=m.span(), kind=m.lastgroup))
    return tokens


def has_vietnamese_char(s: str) -> bool:
    """True if ``s`` contains đ or a vowel carrying Vietnamese diacritics."""
    for ch in unicodedata.normalize("NFC", s):
        if ch in "đĐ":
            return True
        if ch.isascii():
            continue
        decomposed = unicodedata.normalize("NFD", ch)
        base, marks = decomposed[0], decomposed[1:]
        if base in _VI_VOWELS and marks and all(m in _VI_MARKS for m in marks):
            return True
    return False


def _normalize_term(s: str) -> str:
    return unicodedata.normalize("NFC", s).replace("’", "'").lower()


def _read_lexicon(path) -> frozenset[str]:
    try:
        with open(path, encoding="utf-8") as f:
            return frozenset(_normalize_term(line.strip()) for line in f if line.strip())
    except FileNotFoundError:
        raise ConfigError(f"lexicon file not found: {path}") from None
    except OSError as e:
        raise ConfigError(f"cannot read lexicon file {path}: {e}") from None


@dataclass(frozen=True)
class LexiconSet:
    """Word lists for the two languages plus the ambiguity policy.

    ``ambiguous_tag`` decides words that appear in both lists and carry no
    diacritics (``ban``, ``me``, ``to``): ``"matrix"`` tags them as language A,
    ``"embedded"`` as language B.
    """

    lang_a: frozenset[str]
    lang_b: frozenset[str]
    ambiguous_tag: str = "matrix"

    def __post_init__(self):
        if self.ambiguous_tag not in ("matrix", "embedded"):
            raise ConfigError(
                f"ambiguous_tag must be 'matrix' or 'embedded', got {self.ambiguous_tag!r}"
            )

    @classmethod
    def from_terms(cls, lang_a: Iterable[str], lang_b: Iterable[str], ambiguous_tag="matrix"):
        return cls(
            frozenset(_normalize_term(t) for t in lang_a),
            frozenset(_normalize_term(t) for t in lang_b),
            ambiguous_tag,
        )

    @classmethod
    def from_files(cls, lang_a_path, lang_b_path, ambiguous_tag="matrix"):
        return cls(_read_lexicon(lang_a_path), _read_lexicon(lang_b_path), ambiguous_tag)

    @classmethod
    def default(cls, ambiguous_tag="matrix"):
        """The small lexicons bundled with the package."""
        data = resources.files("cmcurate") / "data"
        with resources.as_file(data / "lexicon_vi.txt") as a, resources.as_file(
            data / "lexicon_en.txt"
        ) as b:
            return cls.from_files(Path(a), Path(b), ambiguous_tag)


def _tag_one(token: Token, lexicons: LexiconSet) -> LanguageTag:
    if token.kind in NEUTRAL_KINDS:
        return LanguageTag.NEUTRAL
    surface = token.surface
    if has_vietnamese_char(surface):
        return LanguageTag.LANG_A
    term = _normalize_term(surface)
    in_a = term in lexicons.lang_a
    in_b = term in lexicons.lang_b
    if in_a and in_b:
        return LanguageTag.LANG_A if lexicons.ambiguous_tag == "matrix" else LanguageTag.LANG_B
    if in_b:
        return LanguageTag.LANG_B
    if in_a:
        return LanguageTag.LANG_A
    # Capitalized ASCII words outside both lexicons: treat as named entities.
    if surface.isascii() and surface.isalpha() and surface[0].isupper():
        return LanguageTag.NEUTRAL
    return LanguageTag.LANG_A


def tag_tokens(tokens: Sequence[Token], lexicons: LexiconSet) -> list[Token]:
    """Return copies of ``tokens`` with ``tag`` filled in.

    Priority: neutral token kinds, then Vietnamese diacritics (always A), then
    lexicon membership with the ambiguity policy, then capitalized unknown
    ASCII words as named entities (neutral), then language A.

    Tags are recomputed from the surface, so re-tagging is a no-op.
    """
    return [replace(t, tag=_tag_one(t, lexicons)) for t in tokens]


def tag_text(text: str, lexicons: LexiconSet, id: str = "") -> TaggedText:
    return TaggedText(id=id, text=text, tokens=tuple(tag_tokens(tokenize(text), lexicons)))


class CodeMixTagger(TransformerMixin, BaseEstimator):
    """Tokenize and tag raw strings.

    Parameters
    ----------
    lexicon_a, lexicon_b : path or None
        Word-list files for the matrix / embedded language. ``None`` for both
        uses the bundled lexicons.
    ambiguous_tag : {"matrix", "embedded"}
        How to tag diacritic-free words present in both lexicons.
    """

    def __init__(self, lexicon_a=None, lexicon_b=None, ambiguous_tag="matrix"):
        self.lexicon_a = lexicon_a
        self.lexicon_b = lexicon_b
        self.ambiguous_tag = ambiguous_tag

    def fit(self, X=None, y=None):
        if (self.lexicon_a is None) != (self.lexicon_b is None):
            raise ConfigError("lexicon_a and lexicon_b must be given together")
        if self.lexicon_a is None:
            self.lexicons_ = LexiconSet.default(self.ambiguous_tag)
        else:
            self.lexicons_ = LexiconSet.from_files(
                self.lexicon_a, self.lexicon_b, self.ambiguous_tag
            )
        return self

    def transform(self, X):
        check_is_fitted(self, "lexicons_")
        if isinstance(X, str):
            raise TypeError("expected a sequence of strings, got a single string")
        return [tag_tokens(tokenize(text), self.lexicons_) for text in X]
