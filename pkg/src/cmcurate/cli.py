"""Command-line entry point: ``cmcurate <subcommand> ...``.

Exit codes: 0 success, 1 data error, 2 configuration or usage error.
Every run produces a run manifest (inputs with checksums, config hash,
package versions, counts). It is written to ``--manifest PATH`` when given and
logged at INFO level otherwise. Manifests carry no timestamps, so two runs of
the same command on the same inputs produce the same manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

from . import __version__
from .audit import audit
from .backends import JsonBackend
from .config import ToolConfig, config_hash, load_config
from .corpus import Post, SplitSpec, prefilter_reason, read_jsonl, split, write_jsonl
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    EnsembleUnavailable,
    PipelinePaused,
    ScorerUnavailable,
)
from .evalharness import (
    JudgePreference,
    SystemScores,
    metric_judge_agreement,
    paired_permutation_test,
    win_tie_aggregate,
)
from .filters import FILTER_NAMES, JsonScorer, ParallelPair, run_filter_bank
from .lid import CODE_MIXED, MONOLINGUAL, LidDecision, ensemble_classify, evaluate_lid, stage1_filter
from .metrics import corpus_stats
from .pii import PiiRedactor
from .pipeline import (
    HashScorer,
    JsonTranslator,
    PipelineConfig,
    StubTranslator,
    stage1_seed,
    stage2_iterate,
    stage3_qa,
)
from .textcore import LexiconSet, tag_text

logger = logging.getLogger("cmcurate")

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


# --- run context and manifest ----------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    out = {"cmcurate": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scikit-learn", "regex"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:  # pragma: no cover
            out[dist] = None
    return out


class RunContext:
    """Collects what a run read and wrote, for the run manifest."""

    def __init__(self, command: str, config: ToolConfig | None = None, config_path=None):
        self.command = command
        self.config = config or ToolConfig()
        self.config_path = Path(config_path) if config_path else None
        self.inputs: list[dict] = []
        self.outputs: list[dict] = []
        self.counts: dict = {}

    def resolve(self, path) -> Path:
        """Config-file paths are relative to the config file's directory."""
        p = Path(path)
        if not p.is_absolute() and self.config_path is not None:
            return self.config_path.parent / p
        return p

    def add_input(self, path):
        path = Path(path)
        if path.is_file():
            self.inputs.append({"path": str(path), "sha256": _sha256(path)})

    def add_output(self, path):
        path = Path(path)
        self.outputs.append({"path": str(path), "sha256": _sha256(path)})

    def read(self, path) -> list[dict]:
        self.add_input(path)
        return read_jsonl(path, self.config.io.max_error_fraction).records

    def write(self, records, path) -> int:
        n = write_jsonl(records, path)
        self.add_output(path)
        return n

    def write_json(self, obj, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(_dumps(obj) + "\n", encoding="utf-8")
        self.add_output(path)

    def manifest(self, status: str, exit_code: int, error: str | None = None) -> dict:
        return {
            "tool": "cmcurate",
            "command": self.command,
            "status": status,
            "exit_code": exit_code,
            "error": error,
            "config_hash": config_hash(self.config),
            "seed": self.config.seed,
            "workers": self.config.workers,
            "versions": _versions(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "counts": self.counts,
        }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _emit(obj, path=None, ctx: RunContext | None = None):
    """Write a JSON report to ``path``, or to stdout."""
    if path is not None:
        ctx.write_json(obj, path)
    else:
        sys.stdout.write(_dumps(obj) + "\n")


def _lexicons(ctx: RunContext) -> LexiconSet:
    lx = ctx.config.lexicons
    if lx.lang_a is None:
        return LexiconSet.default(lx.ambiguous_tag)
    a, b = ctx.resolve(lx.lang_a), ctx.resolve(lx.lang_b)
    ctx.add_input(a)
    ctx.add_input(b)
    return LexiconSet.from_files(a, b, lx.ambiguous_tag)


def _posts(records, text_field="text") -> list[Post]:
    try:
        return [Post.from_record(r, text_field) for r in records]
    except ValueError as e:
        raise DataError(str(e)) from None


def _sidecar(output, suffix) -> Path:
    output = Path(output)
    return output.with_name(f"{output.stem}.{suffix}.jsonl")


# --- stats -----------------------------------------------------------------------


def cmd_stats(args, ctx: RunContext):
    lex = _lexicons(ctx)
    field = args.text_field or ctx.config.io.text_field
    groups: dict[str, list] = {}
    skipped = 0
    for path in args.inputs:
        for post in _posts(ctx.read(path), field):
            if post.pii_status == "discarded" or not isinstance(post.text, str):
                skipped += 1
                continue
            name = post.extra.get(args.split_field, Path(path).stem)
            groups.setdefault(str(name), []).append(tag_text(post.text, lex, post.id))
    if not groups:
        raise DataError("no records with text to compute statistics on")
    everything = [t for g in groups.values() for t in g]
    report = {
        "splits": {
            name: dict(corpus_stats(g).to_dict(), n_records=len(g)) for name, g in sorted(groups.items())
        },
        "overall": dict(corpus_stats(everything).to_dict(), n_records=len(everything)),
    }
    ctx.counts.update(n_records=len(everything), n_skipped=skipped, n_splits=len(groups))
    _emit(report, args.output, ctx)


# --- split -----------------------------------------------------------------------


def _parse_fractions(s: str) -> list[float]:
    try:
        parts = [float(x) for x in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {s!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three fractions, got {len(parts)}")
    return parts


def cmd_split(args, ctx: RunContext):
    cfg = ctx.config
    posts = _posts(ctx.read(args.input), args.text_field or cfg.io.text_field)
    ids = [p.id for p in posts]
    if len(set(ids)) != len(ids):
        raise DataError("record ids must be unique to split")
    kept = []
    for p in posts:
        if p.pii_status == "discarded" or p.text is None:
            audit("split_excluded", id=p.id, reason="pii_discarded")
        else:
            kept.append(p)
    if not kept:
        raise DataError("nothing to split: no usable records")
    fractions = args.fractions or cfg.split.fractions
    seed = cfg.seed if args.seed is None else args.seed
    try:
        spec = SplitSpec(*fractions, seed=seed)
    except ValueError as e:
        raise ConfigError(f"split fractions: {e}") from None
    parts = split(kept, spec)
    out = Path(args.out_dir)
    for name in ("train", "dev", "test"):
        ctx.counts[name] = ctx.write(parts[name], out / f"{name}.jsonl")
    ctx.counts.update(n_input=len(posts), n_excluded=len(posts) - len(kept))


# --- pii -------------------------------------------------------------------------


def cmd_pii(args, ctx: RunContext):
    cfg = ctx.config
    patterns = args.patterns or (ctx.resolve(cfg.pii.patterns) if cfg.pii.patterns else None)
    if patterns:
        ctx.add_input(patterns)
    redactor = PiiRedactor(patterns, args.policy or cfg.pii.policy, cfg.pii.max_findings).fit()
    posts = _posts(ctx.read(args.input), args.text_field or cfg.io.text_field)
    kept, discarded = [], []
    counts = {"clean": 0, "redacted": 0, "discarded": 0}
    for post in posts:
        if post.pii_status == "discarded" or not isinstance(post.text, str):
            discarded.append({"id": post.id, "pii_status": "discarded", "reason": "discarded upstream"})
            counts["discarded"] += 1
            continue
        res = redactor.transform([post.text])[0]
        if res.discarded:
            kinds = sorted({f.kind for f in res.findings})
            discarded.append({"id": post.id, "pii_status": "discarded", "reason": res.reason, "pii_kinds": kinds})
            audit("pii_discarded", id=post.id, reason=res.reason, kinds=kinds)
            counts["discarded"] += 1
            continue
        if res.status == "redacted":
            kinds = sorted({f.kind for f in res.findings})
            audit("pii_redacted", id=post.id, kinds=kinds, n=len(res.findings))
            post.text = res.text
            post.pii_status = "redacted"
            post.extra["pii_kinds"] = kinds
        counts[post.pii_status] += 1
        kept.append(post)
    ctx.write(kept, args.output)
    ctx.write(discarded, args.discarded or _sidecar(args.output, "discarded"))
    ctx.counts.update(n_input=len(posts), **counts)


# --- lid -------------------------------------------------------------------------


def _lid_backends(args, ctx: RunContext) -> list[JsonBackend]:
    if args.backends:
        bcfg = load_config(args.backends)
        ctx.add_input(args.backends)
    else:
        bcfg = ctx.config
    return [JsonBackend(bcfg.backend(name)) for name in bcfg.lid.backends]


def _classify(post: Post, lex, backends, stage2_only: bool, workers: int) -> LidDecision:
    s1 = stage1_filter(tag_text(post.text, lex, post.id))
    if not backends:
        return LidDecision(post.id, s1, (), CODE_MIXED if s1 else None,
                           "stage 1 only" if s1 else "stage 1 rejected")
    return ensemble_classify(post, backends, s1, force=stage2_only, max_workers=workers)


def cmd_lid(args, ctx: RunContext):
    if not args.input and not args.eval:
        raise ConfigError("lid needs an input file, --eval GOLD, or both")
    if args.input and not args.output:
        raise ConfigError("lid needs --output when an input file is given")
    cfg = ctx.config
    lex = _lexicons(ctx)
    backends = _lid_backends(args, ctx)
    if args.stage2_only and not backends:
        raise ConfigError("--stage2-only needs backends (set lid.backends in the config)")
    if not backends:
        logger.warning("no LID backends configured; deciding on stage 1 alone")
    field = args.text_field or cfg.io.text_field

    if args.input:
        kept, rejected = [], []
        counts = {"n_input": 0, "code_mixed": 0, "rejected": 0, "unavailable": 0}
        for post in _posts(ctx.read(args.input), field):
            counts["n_input"] += 1
            if post.pii_status == "discarded" or not isinstance(post.text, str):
                continue
            if args.prefilter:
                reason = prefilter_reason(post.text, lex, cfg.prefilter.min_words)
                if reason is not None:
                    post.lid = {"final": None, "rationale": f"prefilter: {reason}"}
                    rejected.append(post)
                    audit("lid_rejected", id=post.id, reason=reason)
                    continue
            try:
                d = _classify(post, lex, backends, args.stage2_only, cfg.workers)
            except EnsembleUnavailable as e:
                post.lid = {"final": None, "rationale": str(e)}
                rejected.append(post)
                counts["unavailable"] += 1
                audit("lid_rejected", id=post.id, reason="ensemble_unavailable")
                continue
            post.lid = {k: v for k, v in d.to_dict().items() if k != "record_id"}
            if d.final == CODE_MIXED:
                kept.append(post)
            else:
                rejected.append(post)
                audit("lid_rejected", id=post.id, reason=d.rationale)
        counts["code_mixed"] = len(kept)
        counts["rejected"] = len(rejected)
        ctx.write(kept, args.output)
        ctx.write(rejected, args.rejected or _sidecar(args.output, "rejected"))
        ctx.counts.update(counts)

    if args.eval:
        gold, preds = {}, []
        for post in _posts(ctx.read(args.eval), field):
            label = post.extra.get("label")
            if label not in (CODE_MIXED, MONOLINGUAL):
                raise DataError(f"gold record {post.id}: 'label' must be {CODE_MIXED} or {MONOLINGUAL}")
            gold[post.id] = label
            try:
                preds.append(_classify(post, lex, backends, args.stage2_only, cfg.workers))
            except EnsembleUnavailable:
                preds.append(LidDecision(post.id, False, (), None, "ensemble unavailable"))
        prf = evaluate_lid(preds, gold)
        ctx.counts["n_eval"] = len(gold)
        _emit(prf.to_dict(), args.report, ctx)


# --- filter ----------------------------------------------------------------------


def _scorer(name: str | None, ctx: RunContext, dry_run: bool, salt: str):
    if name is None:
        return None
    if dry_run:
        return HashScorer(salt=salt)
    return JsonScorer(JsonBackend(ctx.config.backend(name)), max_in_flight=ctx.config.workers)


def cmd_filter(args, ctx: RunContext):
    cfg = ctx.config
    disabled = set(cfg.filters.disabled) | set(args.disable or ())
    fcfg = cfg.filter_config(
        disabled=frozenset(disabled),
        classifier=_scorer(cfg.filters.classifier_backend, ctx, args.dry_run, "classifier"),
        qe=_scorer(cfg.filters.qe_backend, ctx, args.dry_run, "qe"),
        lexicons=_lexicons(ctx),
    )
    records = ctx.read(args.input)
    try:
        pairs = [ParallelPair.from_record(r, args.source_field, args.target_field) for r in records]
    except ValueError as e:
        raise DataError(str(e)) from None
    if len({p.id for p in pairs}) != len(pairs):
        raise DataError("pair ids must be unique")
    report = run_filter_bank(pairs, fcfg)
    summary = report.to_dict()
    ctx.counts.update(n_input=report.n_input, n_accepted=report.n_accepted,
                      n_rejected=report.n_rejected, n_deferred=report.n_deferred)
    if args.dry_run:
        _emit(summary)
        return
    if not args.output:
        raise ConfigError("filter needs --output unless --dry-run is given")
    ctx.write(report.accepted, args.output)
    rejected = []
    for p in report.rejected:
        rec = p.to_record()
        v = p.failing_verdict
        rec["failing_verdict"] = v.to_dict() if v is not None else None
        rejected.append(rec)
    ctx.write(rejected, args.rejected or _sidecar(args.output, "rejected"))
    if report.deferred:
        ctx.write(report.deferred, _sidecar(args.output, "deferred"))
    _emit(summary, args.report, ctx)


# --- augment ---------------------------------------------------------------------


def cmd_augment(args, ctx: RunContext):
    cfg = ctx.config
    ac = cfg.augment
    if args.dry_run:
        translator = StubTranslator()
        seed_translator = StubTranslator(reverse=True)
        classifier = HashScorer(salt="classifier")
        qe = HashScorer(0.8, 1.0, salt="qe")
    else:
        if ac.translator_backend is None:
            raise ConfigError("augment.translator_backend is required (or use --dry-run)")
        if cfg.filters.qe_backend is None:
            raise ConfigError("filters.qe_backend is required for stage 3 (or use --dry-run)")
        retrain = JsonBackend(cfg.backend(ac.retrain_backend)) if ac.retrain_backend else None
        translator = JsonTranslator(JsonBackend(cfg.backend(ac.translator_backend)), retrain)
        seed_name = ac.seed_translator_backend or ac.translator_backend
        seed_translator = JsonTranslator(JsonBackend(cfg.backend(seed_name)))
        classifier = _scorer(cfg.filters.classifier_backend, ctx, False, "")
        qe = _scorer(cfg.filters.qe_backend, ctx, False, "")

    checkpoint = args.resume or (ctx.resolve(ac.checkpoint_dir) if ac.checkpoint_dir else None)
    if ac.source_corpus is None:
        raise ConfigError("augment.source_corpus is required")
    field = cfg.io.text_field
    sources = _posts(ctx.read(ctx.resolve(ac.source_corpus)), field)

    seed_pairs = []
    if not args.resume:
        if ac.seed_corpus is None:
            raise ConfigError("augment.seed_corpus is required")
        natural = _posts(ctx.read(ctx.resolve(ac.seed_corpus)), field)
        seed_pairs, skipped = stage1_seed(natural, seed_translator)
        ctx.counts["seed_skipped"] = len(skipped)
    pcfg = PipelineConfig(
        iteration_count=ac.iteration_count,
        batch_size=ac.batch_size,
        filters=cfg.filter_config(classifier=classifier, qe=qe, lexicons=_lexicons(ctx)),
        checkpoint_dir=Path(checkpoint) if checkpoint else None,
        base_model_tag=ac.base_model_tag,
    )
    result = stage2_iterate(sources, translator, pcfg, seed_pairs, resume=bool(args.resume))
    final, report = stage3_qa(result.pairs, qe, cfg.filters.qe_threshold,
                              cfg.filters.batch_size, records=result.records)

    out = ctx.resolve(ac.output_dir) if not args.output_dir else Path(args.output_dir)
    if args.resume:
        # Stage 1 ran in the original invocation; its pairs live in the checkpoint.
        seed_pairs = [ParallelPair.from_record(r) for r in read_jsonl(Path(checkpoint) / "seed.jsonl").records]
    ctx.write(seed_pairs, out / "seed.jsonl")
    ctx.write(final, out / "augmented.jsonl")
    ctx.write(result.deferred + report.deferred, out / "deferred.jsonl")
    ctx.write_json(
        {
            "model_tag": result.model_tag,
            "iterations": [r.to_dict() for r in result.records],
            "qa": report.to_dict(),
        },
        out / "report.json",
    )
    ctx.counts.update(n_seed=len(seed_pairs), n_generated=sum(r.generated for r in result.records),
                      n_final=len(final))


# --- eval ------------------------------------------------------------------------


def _scores(ctx, path, fa, fb) -> SystemScores:
    segs = []
    for r in ctx.read(path):
        try:
            segs.append((str(r["id"]), float(r[fa]), float(r[fb])))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: score record {r.get('id')!r} lacks a numeric {e}") from None
    try:
        return SystemScores(fa, fb, tuple(segs))
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None


def _prefs(ctx, path) -> list[JudgePreference]:
    try:
        return [JudgePreference(str(r["id"]), r["verdict"], r.get("rationale", "")) for r in ctx.read(path)]
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: bad preference record: {e}") from None


def _pred_label(rec, name):
    # `lid` output nests the decision under "lid"
    label = rec.get(name)
    if label is None and isinstance(rec.get("lid"), dict):
        label = rec["lid"].get(name)
    return label or MONOLINGUAL


def cmd_eval(args, ctx: RunContext):
    cfg = ctx.config
    op = args.eval_op
    try:
        if op == "sigtest":
            scores = _scores(ctx, args.scores, args.field_a, args.field_b)
            res = paired_permutation_test(
                scores,
                n_resamples=args.n_resamples or cfg.eval.n_resamples,
                seed=cfg.seed if args.seed is None else args.seed,
                n_jobs=cfg.workers,
            )
            out = dict(res.to_dict(), system_a=scores.system_a, system_b=scores.system_b)
        elif op == "agreement":
            scores = _scores(ctx, args.scores, args.field_a, args.field_b)
            margin = cfg.eval.margin if args.margin is None else args.margin
            res = metric_judge_agreement(scores, _prefs(ctx, args.prefs), margin, args.margin_mode or cfg.eval.margin_mode)
            out = dict(res.to_dict(), margin=margin)
        elif op == "judge-aggregate":
            out = win_tie_aggregate(_prefs(ctx, args.prefs))
        else:  # lid-prf
            preds = {str(r["id"]): _pred_label(r, args.pred_field) for r in ctx.read(args.predictions)}
            gold = {str(r["id"]): r.get(args.gold_field) for r in ctx.read(args.gold)}
            out = evaluate_lid(preds, gold).to_dict()
    except (KeyError, ValueError) as e:
        raise DataError(f"eval {op}: {e}") from None
    ctx.counts["op"] = op
    _emit(out, args.output, ctx)


# --- parser ----------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="PATH", default=default, help="TOML or JSON config file")
    p.add_argument("--manifest", metavar="PATH", default=default, help="write the run manifest here")
    p.add_argument("--audit-log", metavar="PATH", default=default,
                   help="append per-record audit lines (JSON) to this file")
    p.add_argument("--log-level", default=argparse.SUPPRESS if suppress else "WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmcurate",
        description="Curate code-mixed corpora: identify, redact, filter, split, augment, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("stats", parents=[common], help="code-mixing statistics per split")
    p.add_argument("inputs", nargs="+", help="JSONL files")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--split-field", default="split",
                   help="record field naming the split (default: 'split', else the file name)")
    p.add_argument("--text-field")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", parents=[common], help="deterministic train/dev/test split")
    p.add_argument("input")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fractions", type=_parse_fractions, help="train,dev,test (e.g. 0.8,0.1,0.1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--text-field")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pii", parents=[common], help="redact or discard personal data")
    p.add_argument("input")
    p.add_argument("--output", required=True)
    p.add_argument("--patterns", help="extra pattern file: '<kind> <regex>' per line")
    p.add_argument("--policy", choices=["redact", "discard-all"])
    p.add_argument("--discarded", help="sidecar for discarded record ids (default: <output>.discarded.jsonl)")
    p.add_argument("--text-field")
    p.set_defaults(func=cmd_pii)

    p = sub.add_parser("lid", parents=[common], help="two-stage code-mixing identification")
    p.add_argument("input", nargs="?")
    p.add_argument("--output")
    p.add_argument("--backends", metavar="CONFIG", help="config file defining [[backends]] and lid.backends")
    p.add_argument("--stage2-only", action="store_true", help="send every record to the ensemble")
    p.add_argument("--eval", metavar="GOLD", help="score against gold JSONL with a 'label' field")
    p.add_argument("--report", help="write the --eval report here instead of stdout")
    p.add_argument("--prefilter", action="store_true", help="drop short, link-bearing or symbol-only posts first")
    p.add_argument("--rejected", help="sidecar for rejected records (default: <output>.rejected.jsonl)")
    p.add_argument("--text-field")
    p.set_defaults(func=cmd_lid)

    p = sub.add_parser("filter", parents=[common], help="filter candidate parallel pairs")
    p.add_argument("input")
    p.add_argument("--output")
    p.add_argument("--disable", action="append", choices=FILTER_NAMES, metavar="NAME",
                   help=f"disable a filter (repeatable): {', '.join(FILTER_NAMES)}")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--rejected", help="sidecar for rejected pairs (default: <output>.rejected.jsonl)")
    p.add_argument("--dry-run", action="store_true",
                   help="print the report only; write no files; model gates use stub scores")
    p.add_argument("--source-field", default="source_text")
    p.add_argument("--target-field", default="target_text")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("augment", parents=[common], help="seed, iterate and QA synthetic pairs")
    p.add_argument("--resume", metavar="CHECKPOINT", help="continue from this checkpoint directory")
    p.add_argument("--dry-run", action="store_true", help="use offline stub translator and scorers")
    p.add_argument("--output-dir", help="override augment.output_dir")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", parents=[common], help="significance tests and judge agreement")
    ev = p.add_subparsers(dest="eval_op", metavar="OP", required=True)
    e = ev.add_parser("sigtest", parents=[common], help="paired permutation test")
    e.add_argument("scores", help="JSONL with id and two score fields")
    e.add_argument("--n-resamples", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--field-a", default="score_a")
    e.add_argument("--field-b", default="score_b")
    e.add_argument("--output")
    e = ev.add_parser("agreement", parents=[common], help="metric vs judge agreement")
    e.add_argument("scores")
    e.add_argument("prefs", help="JSONL with id and verdict in A, B, Tie, BothBad")
    e.add_argument("--margin", type=float)
    e.add_argument("--margin-mode", choices=["relative", "absolute"])
    e.add_argument("--field-a", default="score_a")
    e.add_argument("--field-b", default="score_b")
    e.add_argument("--output")
    e = ev.add_parser("judge-aggregate", parents=[common], help="win/loss/tie percentages")
    e.add_argument("prefs")
    e.add_argument("--output")
    e = ev.add_parser("lid-prf", parents=[common], help="accuracy/precision/recall/F1 of LID output")
    e.add_argument("predictions")
    e.add_argument("gold")
    e.add_argument("--pred-field", default="final")
    e.add_argument("--gold-field", default="label")
    e.add_argument("--output")
    p.set_defaults(func=cmd_eval)
    return parser


def _setup_logging(args):
    root = logging.getLogger("cmcurate")
    root.setLevel(logging.DEBUG)
    for h in list(root.handlers):
        if getattr(h, "_cmcurate", False):
            root.removeHandler(h)
            h.close()
    stderr = logging.StreamHandler(sys.stderr)
    stderr.setLevel(getattr(logging, args.log_level))
    stderr.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    stderr._cmcurate = True
    root.addHandler(stderr)
    if args.audit_log:
        fh = logging.FileHandler(args.audit_log, encoding="utf-8")
        fh.setLevel(logging.INFO)
        fh.addFilter(logging.Filter("cmcurate.audit"))
        fh.setFormatter(logging.Formatter("%(message)s"))
        fh._cmcurate = True
        root.addHandler(fh)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    _setup_logging(args)

    ctx = RunContext(args.command if args.command != "eval" else f"eval {args.eval_op}")
    error = None
    try:
        ctx.config = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            # the manifest records the seed that actually ran
            ctx.config.seed = args.seed
        ctx.config_path = Path(args.config) if args.config else None
        args.func(args, ctx)
        code = EXIT_OK
    except ConfigError as e:
        error, code = f"config error: {e}", EXIT_CONFIG
    except PipelinePaused as e:
        error, code = f"paused: {e}; resume with --resume {e.checkpoint_dir}", EXIT_DATA
    except (DataError, EnsembleUnavailable, ScorerUnavailable, BackendError) as e:
        error, code = f"{type(e).__name__}: {e}", EXIT_DATA
    if error:
        logger.error(error)

    manifest = ctx.manifest("ok" if code == EXIT_OK else "error", code, error)
    if args.manifest:
        Path(args.manifest).parent.mkdir(parents=True, exist_ok=True)
        Path(args.manifest).write_text(_dumps(manifest) + "\n", encoding="utf-8")
    else:
        logger.info("run manifest: %s", json.dumps(manifest, sort_keys=True))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
