"""Curation toolkit for code-mixed text: tagging, mixing statistics, language
identification, PII scrubbing, parallel-pair filtering, augmentation
orchestration and evaluation statistics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BackendError,
    CmCurateError,
    ConfigError,
    DataError,
    EnsembleUnavailable,
    PipelinePaused,
    ScorerUnavailable,
)
from .textcore import CodeMixTagger, LanguageTag, LexiconSet, TaggedText, Token, tag_text, tokenize  # noqa: E402
from .metrics import MixStats, MixStatsTransformer, cmi, corpus_stats, sentence_stats, spf  # noqa: E402
from .evalharness import (  # noqa: E402
    PRF,
    JudgePreference,
    SystemScores,
    f1_score,
    metric_judge_agreement,
    paired_permutation_test,
    prf_accuracy,
    win_tie_aggregate,
)
from .lid import LidDecision, ensemble_classify, evaluate_lid, stage1_filter  # noqa: E402
from .pii import PiiRedactor, redact, scan  # noqa: E402
from .corpus import Post, SplitSpec, read_jsonl, split, write_jsonl  # noqa: E402
from .filters import FilterBank, FilterConfig, FilterVerdict, ParallelPair, run_filter_bank  # noqa: E402
from .pipeline import PipelineConfig, stage1_seed, stage2_iterate, stage3_qa  # noqa: E402

__all__ = [
    "__version__",
    "BackendError", "CmCurateError", "ConfigError", "DataError", "EnsembleUnavailable",
    "PipelinePaused", "ScorerUnavailable",
    "CodeMixTagger", "LanguageTag", "LexiconSet", "TaggedText", "Token", "tag_text", "tokenize",
    "MixStats", "MixStatsTransformer", "cmi", "corpus_stats", "sentence_stats", "spf",
    "PRF", "JudgePreference", "SystemScores", "f1_score", "metric_judge_agreement",
    "paired_permutation_test", "prf_accuracy", "win_tie_aggregate",
    "LidDecision", "ensemble_classify", "evaluate_lid", "stage1_filter",
    "PiiRedactor", "redact", "scan",
    "Post", "SplitSpec", "read_jsonl", "split", "write_jsonl",
    "FilterBank", "FilterConfig", "FilterVerdict", "ParallelPair", "run_filter_bank",
    "PipelineConfig", "stage1_seed", "stage2_iterate", "stage3_qa",
]
