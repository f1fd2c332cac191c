"""Tool configuration: one TOML or JSON file, parsed strictly.

Unknown keys, wrong types and out-of-domain thresholds raise
:class:`ConfigError` naming the offending key. Secrets are never stored in the
file: a backend names the environment variable holding its API key
(``api_key_env``) and the key is read only when a request is sent.

Example::

    seed = 7
    workers = 4

    [filters]
    qe_threshold = 0.9
    qe_backend = "xcomet"

    [[backends]]
    name = "xcomet"
    endpoint = "https://qe.example.org/score"
    api_key_env = "QE_API_KEY"
"""

from __future__ import annotations

import hashlib
import json
import sys
import types
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .backends import ClassifierBackend
from .errors import ConfigError
from .filters import FILTER_NAMES, FilterConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "BackendConfig",
    "ToolConfig",
    "load_config",
    "parse_config",
    "config_hash",
]


@dataclass
class LexiconConfig:
    lang_a: str | None = None
    lang_b: str | None = None
    ambiguous_tag: str = "matrix"


@dataclass
class PiiConfig:
    patterns: str | None = None
    policy: str = "redact"
    max_findings: int = 3


@dataclass
class PrefilterConfig:
    min_words: int = 11


@dataclass
class SplitConfig:
    fractions: list[float] = field(default_factory=lambda: [0.8, 0.1, 0.1])


@dataclass
class FiltersConfig:
    length_interval: list[float] = field(default_factory=lambda: [0.5, 1.5])
    lexical_threshold: float = 0.3
    lexical_n: int = 5
    char_threshold: float = 0.2
    char_n: int = 10
    equilibrium_threshold: float = 0.30
    classifier_threshold: float = 0.5
    qe_threshold: float = 0.9
    disabled: list[str] = field(default_factory=list)
    batch_size: int = 32
    classifier_backend: str | None = None
    qe_backend: str | None = None


@dataclass
class LidConfig:
    backends: list[str] = field(default_factory=list)


@dataclass
class AugmentConfig:
    seed_corpus: str | None = None
    source_corpus: str | None = None
    output_dir: str = "augment_out"
    checkpoint_dir: str | None = None
    iteration_count: int = 4
    batch_size: int | None = None
    translator_backend: str | None = None
    retrain_backend: str | None = None
    seed_translator_backend: str | None = None
    base_model_tag: str = "base"


@dataclass
class EvalConfig:
    n_resamples: int = 10_000
    margin: float = 0.02
    margin_mode: str = "relative"


@dataclass
class IoConfig:
    max_error_fraction: float = 0.05
    text_field: str = "text"


@dataclass
class BackendConfig:
    name: str
    endpoint: str
    prompt_template: str = "{text}"
    timeout_ms: int = 30_000
    max_retries: int = 2
    rate_limit: float | None = None
    api_key_env: str | None = None
    backoff_s: float = 0.5

    def to_backend(self) -> ClassifierBackend:
        return ClassifierBackend(**asdict(self))


@dataclass
class ToolConfig:
    seed: int = 0
    workers: int = 1
    lexicons: LexiconConfig = field(default_factory=LexiconConfig)
    pii: PiiConfig = field(default_factory=PiiConfig)
    prefilter: PrefilterConfig = field(default_factory=PrefilterConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    filters: FiltersConfig = field(default_factory=FiltersConfig)
    lid: LidConfig = field(default_factory=LidConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IoConfig = field(default_factory=IoConfig)
    backends: list[BackendConfig] = field(default_factory=list)

    def backend(self, name: str) -> ClassifierBackend:
        for b in self.backends:
            if b.name == name:
                return b.to_backend()
        raise ConfigError(f"no backend named {name!r} in [[backends]]")

    def filter_config(self, **overrides) -> FilterConfig:
        f = self.filters
        kw = dict(
            length_interval=tuple(f.length_interval),
            lexical_threshold=f.lexical_threshold,
            lexical_n=f.lexical_n,
            char_threshold=f.char_threshold,
            char_n=f.char_n,
            equilibrium_threshold=f.equilibrium_threshold,
            classifier_threshold=f.classifier_threshold,
            qe_threshold=f.qe_threshold,
            disabled=frozenset(f.disabled),
            batch_size=f.batch_size,
            max_in_flight=self.workers,
        )
        kw.update(overrides)
        return FilterConfig(**kw)

    def to_dict(self):
        return asdict(self)


# --- strict parsing -----------------------------------------------------------


def _check_type(value, tp, where):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        errors = []
        for a in args:
            if a is type(None):
                continue
            try:
                return _check_type(value, a, where)
            except ConfigError as e:
                errors.append(e)
        raise errors[0]
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        (item,) = args
        return [_check_type(v, item, f"{where}[{i}]") for i, v in enumerate(value)]
    if is_dataclass(tp):
        return _build(tp, value, where)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp in (str, bool):
        if not isinstance(value, tp):
            raise ConfigError(f"{where}: expected {tp.__name__}, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported type {tp}")  # pragma: no cover


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a table, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config key '{where + '.' if where else ''}{key}'")
    kwargs = {}
    for name, f in names.items():
        key = f"{where}.{name}" if where else name
        if name in data:
            kwargs[name] = _check_type(data[name], hints[name], key)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f"missing required config key '{key}'")
    return cls(**kwargs)


def _validate(cfg: ToolConfig):
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.lexicons.ambiguous_tag not in ("matrix", "embedded"):
        raise ConfigError("lexicons.ambiguous_tag must be 'matrix' or 'embedded'")
    if (cfg.lexicons.lang_a is None) != (cfg.lexicons.lang_b is None):
        raise ConfigError("lexicons.lang_a and lexicons.lang_b must be set together")
    if cfg.pii.policy not in ("redact", "discard-all"):
        raise ConfigError("pii.policy must be 'redact' or 'discard-all'")
    if cfg.pii.max_findings < 0:
        raise ConfigError("pii.max_findings must be >= 0")
    if len(cfg.split.fractions) != 3:
        raise ConfigError("split.fractions must have three entries")
    if len(cfg.filters.length_interval) != 2:
        raise ConfigError("filters.length_interval must have two entries")
    for name in cfg.filters.disabled:
        if name not in FILTER_NAMES:
            raise ConfigError(f"filters.disabled: unknown filter {name!r}")
    try:
        cfg.filter_config()
    except ConfigError as e:
        raise ConfigError(f"filters: {e}") from None
    if not 0 <= cfg.io.max_error_fraction <= 1:
        raise ConfigError("io.max_error_fraction must be in [0, 1]")
    if cfg.eval.n_resamples < 1000:
        raise ConfigError("eval.n_resamples must be >= 1000")
    if not 0 <= cfg.eval.margin < 1:
        raise ConfigError("eval.margin must be in [0, 1)")
    if cfg.eval.margin_mode not in ("relative", "absolute"):
        raise ConfigError("eval.margin_mode must be 'relative' or 'absolute'")
    if cfg.augment.iteration_count < 1:
        raise ConfigError("augment.iteration_count must be >= 1")
    if cfg.augment.batch_size is not None and cfg.augment.batch_size < 1:
        raise ConfigError("augment.batch_size must be >= 1")

    seen = set()
    for i, b in enumerate(cfg.backends):
        if b.name in seen:
            raise ConfigError(f"backends[{i}].name: duplicate backend {b.name!r}")
        seen.add(b.name)
        b.to_backend()  # runs its own domain checks
    refs = [
        ("filters.classifier_backend", cfg.filters.classifier_backend),
        ("filters.qe_backend", cfg.filters.qe_backend),
        ("augment.translator_backend", cfg.augment.translator_backend),
        ("augment.retrain_backend", cfg.augment.retrain_backend),
        ("augment.seed_translator_backend", cfg.augment.seed_translator_backend),
    ] + [(f"lid.backends[{i}]", n) for i, n in enumerate(cfg.lid.backends)]
    for key, name in refs:
        if name is not None and name not in seen:
            raise ConfigError(f"{key}: no backend named {name!r}")
    if cfg.lid.backends and len(cfg.lid.backends) % 2 == 0:
        raise ConfigError("lid.backends: ensemble size must be odd")


def parse_config(data: dict) -> ToolConfig:
    cfg = _build(ToolConfig, data, "")
    _validate(cfg)
    return cfg


def load_config(path) -> ToolConfig:
    """Load a ``.toml`` or ``.json`` config file; ``None`` gives the defaults."""
    if path is None:
        return ToolConfig()
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    return parse_config(data)


def config_hash(cfg: ToolConfig) -> str:
    """SHA-256 of the canonical JSON form of the effective configuration."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
