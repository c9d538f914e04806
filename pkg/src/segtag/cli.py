"""Command-line pipeline: corpus building, training, generation, evaluation,
and hyperparameter sweeps.

Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .config import ConfigError, RunConfig, load_config, load_resolved, save_resolved
from .generate import generate_hashtags, greedy_decode
from .metrics import evaluate_predictions, report_table, sequence_rouge
from .model import ModelConfig, SegSelModel
from .plotting import plot_report, plot_sweep, plot_training_curve
from .tokenizer import (
    Vocabulary,
    build_vocab,
    decode_output,
    encode_target,
    read_encoded_dataset,
    segment_encode,
    tokenize_text,
    write_encoded_dataset,
)
from .training import AdamState, load_checkpoint, run_training


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def _parse_overrides(pairs: list[str] | None) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _load_cfg(args, extra_overrides: dict | None = None) -> RunConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["train.seed"] = str(args.seed)
    if extra_overrides:
        overrides.update({k: str(v) for k, v in extra_overrides.items()})
    path = getattr(args, "config", None)
    if path is not None:
        _require_file(path, "config file")
    return load_config(path, overrides)


def _encode_pairs(records, vocab: Vocabulary, cfg: RunConfig, cache_path: Path | None):
    """(source content ids, target ids) per record, cached as binary."""
    if cache_path is not None and cache_path.exists():
        return read_encoded_dataset(cache_path)
    pairs = []
    for rec in records:
        src = np.asarray(
            vocab.encode_tokens(tokenize_text(rec.body, vocab.mode)[: cfg["seg.max_source_len"]]),
            dtype=np.int32,
        )
        if len(src) == 0 or not rec.hashtags:
            continue
        tgt = encode_target(rec.hashtags, vocab, cfg["seg.max_target_len"])
        pairs.append((src, tgt))
    if cache_path is not None:
        write_encoded_dataset(cache_path, pairs)
    return pairs


def _segmented(pairs, vocab: Vocabulary, cfg: RunConfig):
    out = []
    for src, tgt in pairs:
        tokens = [vocab.token(int(t)) for t in src]
        si = segment_encode(
            tokens, cfg["seg.len"], vocab, cfg["seg.max_source_len"], cfg["seg.k_embeddings"]
        )
        out.append((si, np.asarray(tgt, dtype=np.int32)))
    return out


def _dev_scorer(dev_records, vocab: Vocabulary, cfg: RunConfig):
    """Greedy-decode dev posts and average sequence ROUGE-1."""
    tok = lambda s: tokenize_text(s, vocab.mode)
    prepared = []
    for rec in dev_records:
        tokens = tok(rec.body)[: cfg["seg.max_source_len"]]
        if not tokens or not rec.hashtags:
            continue
        si = segment_encode(tokens, cfg["seg.len"], vocab, cfg["seg.max_source_len"],
                            cfg["seg.k_embeddings"])
        prepared.append((si, rec.hashtags))
    if not prepared:
        return None

    def score(model: SegSelModel) -> float:
        total = 0.0
        for si, gold in prepared:
            ids = greedy_decode(si, model, cfg["seg.max_target_len"])
            r1, _, _ = sequence_rouge(decode_output(ids, model.vocab), gold, tok)
            total += r1
        return total / len(prepared)

    return score


def _load_run_dir(run_dir: Path) -> tuple[RunConfig, SegSelModel]:
    resolved = _require_file(run_dir / "config.resolved.json", "resolved config")
    cfg, extra = load_resolved(resolved)
    vocab = Vocabulary.load(_require_file(run_dir / "vocab.tsv", "vocabulary"), cfg["vocab.mode"])
    if len(vocab) != extra.get("vocab_size", len(vocab)):
        raise UsageError(f"vocabulary size mismatch in {run_dir}")
    model_cfg = ModelConfig.from_run_config(cfg, len(vocab))
    model = SegSelModel.build(model_cfg, vocab, seed=cfg["train.seed"])
    ckpt = _pick_checkpoint(run_dir)
    load_checkpoint(ckpt, model.params, AdamState(model.params))
    return cfg, model


def _pick_checkpoint(run_dir: Path) -> Path:
    best_manifest = run_dir / "best.json"
    if best_manifest.exists():
        entries = json.loads(best_manifest.read_text())
        if entries:
            candidate = run_dir / entries[0]["file"]
            if candidate.exists():
                return candidate
    latest = run_dir / "ckpt_latest.bin"
    if latest.exists():
        return latest
    raise UsageError(f"no checkpoint found under {run_dir}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_build_corpus(args) -> int:
    _require_file(args.input, "input corpus")
    min_chars = args.min_chars
    if min_chars is None:
        min_chars = 60 if args.style == "weibo" else 0
    ratios = tuple(float(r) for r in args.ratios.split(","))

    records, diagnostics = corpus_mod.load_raw_records(args.input, args.style)
    for msg in diagnostics:
        print(f"  skipped {msg}", file=sys.stderr)
    records = corpus_mod.filter_records(records, min_chars)
    if not records:
        raise UsageError("no usable records after extraction and filtering")

    token_mode = args.token_mode or ("char" if args.style == "weibo" else "word")
    tok = lambda s: tokenize_text(s, token_mode)
    stats = corpus_mod.corpus_stats(records, tok)
    train, dev, test = corpus_mod.split_corpus(records, ratios, args.seed)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_records(out / "train.jsonl", train)
    corpus_mod.write_records(out / "dev.jsonl", dev)
    corpus_mod.write_records(out / "test.jsonl", test)
    (out / "stats.json").write_text(json.dumps(stats.to_dict(), indent=2))
    table = corpus_mod.stats_table(stats, title=f"{args.style} corpus")
    (out / "stats.txt").write_text(table + "\n")
    print(table)
    print(f"splits: train={len(train)} dev={len(dev)} test={len(test)} -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    data_dir = Path(args.data)
    train_path = _require_file(data_dir / "train.jsonl", "training split")
    dev_path = data_dir / "dev.jsonl"

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train_records = corpus_mod.read_records(train_path)
    if not train_records:
        raise UsageError(f"training split {train_path} is empty")
    dev_records = corpus_mod.read_records(dev_path) if dev_path.exists() else []

    vocab_path = out / "vocab.tsv"
    if args.resume and vocab_path.exists():
        vocab = Vocabulary.load(vocab_path, cfg["vocab.mode"])
    else:
        texts = [r.body for r in train_records]
        texts += [tag for r in train_records for tag in r.hashtags]
        vocab = build_vocab(texts, cfg["vocab.min_freq"], cfg["vocab.mode"])
        vocab.save(vocab_path)
    save_resolved(cfg, out / "config.resolved.json", extra={"vocab_size": len(vocab)})

    pairs = _encode_pairs(train_records, vocab, cfg, out / "train.cache")
    if not pairs:
        raise UsageError("no trainable pairs after encoding")
    train_pairs = _segmented(pairs, vocab, cfg)

    model_cfg = ModelConfig.from_run_config(cfg, len(vocab))
    model = SegSelModel.build(model_cfg, vocab, seed=cfg["train.seed"])
    dev_eval = _dev_scorer(dev_records, vocab, cfg) if dev_records else None

    summary = run_training(
        model, train_pairs, cfg, out,
        dev_eval=dev_eval, resume=args.resume, log=print,
    )
    plot_training_curve(out / "metrics.jsonl", out / "loss_curve.png")
    print(f"done: {summary['steps']} steps, final loss {summary['final_loss']:.4f}")
    return 0


def cmd_generate(args) -> int:
    run_dir = Path(args.checkpoint)
    _require_file(run_dir, "checkpoint directory")
    cfg, model = _load_run_dir(run_dir)
    if args.topk > args.beam:
        raise UsageError(f"--topk {args.topk} exceeds --beam {args.beam}")
    records = corpus_mod.read_records(_require_file(args.input, "input posts"))
    length_norm = cfg["infer.length_norm"] == "mean"

    out_path = Path(args.output)
    n_written = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            tokens = tokenize_text(rec.body, model.vocab.mode)
            if not tokens:
                print(f"  skipped {rec.source_id}: empty body", file=sys.stderr)
                continue
            si = model.segment_input(rec.body)
            result = generate_hashtags(
                si, model, args.beam, args.topk, length_norm=length_norm
            )
            fh.write(json.dumps({"post_id": rec.source_id, **result}, ensure_ascii=False) + "\n")
            n_written += 1
    print(f"wrote {n_written} predictions -> {out_path}")
    return 0


def cmd_evaluate(args) -> int:
    pred_path = _require_file(args.pred, "predictions file")
    gold_path = _require_file(args.gold, "gold file")
    preds = [json.loads(l) for l in pred_path.read_text(encoding="utf-8").splitlines() if l.strip()]
    golds = corpus_mod.read_records(gold_path)
    if not preds:
        raise UsageError(f"predictions file {pred_path} is empty")

    by_id = {r.source_id: r for r in golds}
    aligned: list[tuple[list[str], str]] = []
    matched: list[dict] = []
    for i, pred in enumerate(preds):
        rec = by_id.get(str(pred.get("post_id")))
        if rec is None:
            if i < len(golds):
                rec = golds[i]
            else:
                raise UsageError(f"prediction {pred.get('post_id')!r} has no gold record")
        matched.append(pred)
        aligned.append((rec.hashtags, rec.body))

    tok = lambda s: tokenize_text(s, args.token_mode)
    report = evaluate_predictions(matched, aligned, tok)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    table = report_table(report)
    (out_dir / "report.txt").write_text(table + "\n")
    plot_report(report, out_dir / "report.png")
    print(table)
    return 0


SWEEP_PARAMS = ("ssm.k", "seg.len")
SWEEP_HEADER = ["value", "rouge1", "rouge2", "rougeL"]


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"--param must be one of {SWEEP_PARAMS}, got {args.param!r}")
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--values must be comma-separated integers, got {args.values!r}")
    if not values:
        raise UsageError("--values is empty")
    base_cfg = _load_cfg(args)  # validated before any output is written

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    done: dict[int, dict] = {}
    if csv_path.exists():
        with open(csv_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                done[int(float(row["value"]))] = row

    rows: list[dict] = []
    for value in values:
        if value in done:
            print(f"value {value}: already complete, skipping")
            rows.append(done[value])
            continue
        print(f"value {value}: training")
        run_out = out / f"run_{args.param.replace('.', '_')}_{value}"
        train_args = argparse.Namespace(
            config=args.config, data=args.data, out=run_out,
            resume=False, set=list(args.set or []) + [f"{args.param}={value}"],
            seed=args.seed,
        )
        cmd_train(train_args)

        data_dir = Path(args.data)
        eval_split = data_dir / "dev.jsonl"
        if not eval_split.exists() or not corpus_mod.read_records(eval_split):
            eval_split = data_dir / "train.jsonl"
        pred_path = run_out / "pred.jsonl"
        gen_args = argparse.Namespace(
            checkpoint=run_out, input=eval_split, output=pred_path,
            beam=base_cfg["infer.beam_size"], topk=base_cfg["infer.top_k"],
        )
        cmd_generate(gen_args)
        eval_args = argparse.Namespace(
            pred=pred_path, gold=eval_split, out=run_out,
            token_mode=base_cfg["vocab.mode"],
        )
        cmd_evaluate(eval_args)
        report = json.loads((run_out / "report.json").read_text())
        row = {
            "value": str(value),
            "rouge1": f"{report['rouge1_f1']:.2f}",
            "rouge2": f"{report['rouge2_f1']:.2f}",
            "rougeL": f"{report['rougeL_f1']:.2f}",
        }
        rows.append(row)
        done[value] = row
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER)
            writer.writeheader()
            for r in sorted(done.values(), key=lambda r: int(float(r["value"]))):
                writer.writerow(r)

    plot_sweep(csv_path, out / "sweep.png", args.param)
    print(f"sweep complete: {len(rows)} values -> {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segtag",
        description="Segment-selective hashtag generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="extract, filter, split, and summarize a raw corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--style", choices=("weibo", "twitter"), default="twitter")
    p.add_argument("--min-chars", type=int, default=None,
                   help="minimum body length in characters (default 60 for weibo, 0 otherwise)")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--token-mode", choices=("word", "char"), default=None)
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train a model on a built corpus")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="directory containing train.jsonl / dev.jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="beam-search hashtags for posts")
    p.add_argument("--checkpoint", required=True, help="training output directory")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--beam", type=int, default=20)
    p.add_argument("--topk", type=int, default=10)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score predictions against gold hashtags")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--token-mode", choices=("word", "char"), default="word")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train/evaluate across one hyperparameter")
    p.add_argument("--param", required=True, help="ssm.k or seg.len")
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
