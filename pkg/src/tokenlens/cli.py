"""Command-line interface: train, encode/decode, analyze, LZ pipelines, grids.

Exit codes: 0 success, 1 configuration/usage error, 2 partial cell failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .corpus import CorpusError, load_documents, stream_characters
from .experiments import ConfigError, ExperimentConfig, collect_reports, emit_report, run_experiment
from .lzbpe import train_lz_aware_bpe
from .lzpipe import ALGORITHMS, get_compressor, pack_token_ids, pipeline_report, unpack_token_ids, PackedIdStream
from .metrics import MetricsError, intrinsic_compressibility, pearson_correlation, tokens_per_char
from .tokenizer import (
    TokenStream,
    TokenizerError,
    decode,
    encode,
    load_model,
    load_rank_list_model,
    prepare_text,
    save_model,
)
from .trainers import TrainConfig, TrainingError, train


def _read_text(paths: list[str], fmt: str, max_chars: int | None, separator: str) -> str:
    docs = []
    for p in paths:
        docs.extend(load_documents(p, format=fmt))
    limit = max_chars if max_chars else 10**12
    return stream_characters(docs, limit, separator=separator).text


def _cmd_train(args: argparse.Namespace) -> int:
    text = _read_text(args.input, args.format, args.max_chars, args.separator)
    cfg = TrainConfig(
        family=args.family,
        vocab_size=args.vocab_size,
        seed=args.seed,
        max_token_length=args.max_token_length,
    )
    model = train(text, cfg)
    save_model(model, args.output)
    print(f"trained {args.family} vocab={model.vocab.size} -> {args.output}")
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    text = args.text if args.text is not None else _read_text(args.input, args.format, args.max_chars, "\n")
    stream = encode(model, prepare_text(model, text))
    if args.packed:
        packed = pack_token_ids(stream, args.width)
        Path(args.output).write_bytes(packed.data)
        print(f"{stream.n} ids packed at width {args.width} -> {args.output}")
    else:
        payload = {
            "ids": stream.ids.tolist(),
            "n": stream.n,
            "source_chars": stream.source_chars,
            "source_bytes": stream.source_bytes,
        }
        Path(args.output).write_text(json.dumps(payload), encoding="utf-8")
        print(f"{stream.n} ids -> {args.output}")
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    if args.packed:
        data = Path(args.input).read_bytes()
        ids = unpack_token_ids(
            PackedIdStream(data=data, width=args.width, count=len(data) // (args.width // 8))
        )
    else:
        ids = np.asarray(json.loads(Path(args.input).read_text(encoding="utf-8"))["ids"])
    text = decode(model, TokenStream(ids=ids, source_chars=0, source_bytes=0))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"decoded {len(ids)} ids -> {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    from .metrics import analyze_stream

    model = load_model(args.model)
    text = _read_text(args.input, args.format, args.max_chars, "\n")
    report = analyze_stream(
        model,
        text,
        max_k=args.max_k,
        estimator=args.estimator,
        renyi_alpha=args.renyi_alpha,
        nominal_vocab_size=args.nominal_vocab_size,
    )
    if args.lz:
        for name in args.compressors.split(","):
            comp = get_compressor(name)
            from .lzpipe import raw_lz_bpc, token_lz_bpc

            report.bpc[f"raw_{name}"] = raw_lz_bpc(text, comp)
            report.bpc[f"token_{name}"] = token_lz_bpc(model, text, comp)
            report.compressor_levels[name] = comp.level
    payload = json.dumps(report.to_json_dict(), indent=1, sort_keys=True)
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
    print(payload if not args.output else f"report -> {args.output}")
    return 0


def _cmd_lzpipe(args: argparse.Namespace) -> int:
    models = []
    for spec in args.model:
        name, _, path = spec.partition("=")
        if not path:
            name, path = Path(spec).stem, spec
        models.append((name, load_model(path)))
    text = _read_text(args.input, args.format, args.max_chars, "\n")
    comps = [get_compressor(c) for c in args.compressors.split(",")]
    report = pipeline_report(models, text, comps, width=args.width)
    print(report.format_table())
    if args.output:
        Path(args.output).write_text(json.dumps(report.to_json_dict(), indent=1), encoding="utf-8")
        print(f"json -> {args.output}")
    return 0


def _cmd_lzbpe_train(args: argparse.Namespace) -> int:
    text = _read_text(args.input, args.format, args.max_chars, "\n")
    n_val = int(len(text) * args.val_fraction)
    if n_val < 1 or n_val >= len(text):
        raise ConfigError(f"val fraction {args.val_fraction} leaves no train or no val data")
    train_text, val_text = text[:-n_val], text[-n_val:]
    comp = get_compressor(args.compressor, args.level)
    model, trace = train_lz_aware_bpe(
        train_text,
        val_text,
        target_vocab=args.target_vocab,
        candidates=args.candidates,
        compressor=comp,
    )
    save_model(model, args.output)
    if args.trace:
        trace.to_jsonl(args.trace)
    print(
        f"lz-aware bpe |V|={model.vocab.size - 4} merges={len(model.merges)} "
        f"val {trace.baseline_val_size} -> {trace.final_val_size()} "
        f"({trace.improvement():.1%} improvement) -> {args.output}"
    )
    return 0


def _cmd_bench_ranklist(args: argparse.Namespace) -> int:
    ranklists = []
    for spec in args.ranklist:
        name, _, path = spec.partition("=")
        if not path:
            name, path = Path(spec).stem, spec
        ranklists.append((name, load_rank_list_model(path)))
    comp = get_compressor("zstd")
    results = []
    for spec in args.input:
        domain, _, path = spec.partition("=")
        if not path:
            domain, path = Path(spec).stem, spec
        docs = [d for d in load_documents(path, format=args.format)][: args.docs]
        docs = [d for d in docs if d.text.strip()]
        if len(docs) < 2:
            raise ConfigError(f"domain {domain}: need at least 2 nonempty documents")
        xs = [intrinsic_compressibility(d.text, comp) for d in docs]
        for name, model in ranklists:
            ys = [tokens_per_char(model, [d]) for d in docs]
            r = pearson_correlation(xs, ys)
            mean_tpc = float(np.mean(ys))
            results.append(
                {
                    "domain": domain,
                    "ranklist": name,
                    "documents": len(docs),
                    "mean_zstd_bpc": float(np.mean(xs)),
                    "mean_tokens_per_char": mean_tpc,
                    "pearson_r": r,
                }
            )
            print(
                f"{domain:>12} {name:>16}: docs={len(docs)} zstd_bpc={np.mean(xs):.3f} "
                f"tokens/char={mean_tpc:.4f} r={r:+.3f}"
            )
    if args.output:
        Path(args.output).write_text(json.dumps(results, indent=1), encoding="utf-8")
        print(f"json -> {args.output}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    manifest = run_experiment(cfg)
    done = sum(1 for c in manifest.cells.values() if c.get("status") == "done")
    print(f"cells done: {done}, failed: {manifest.n_failed} -> {cfg.output_dir}")
    return 2 if manifest.n_failed else 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = collect_reports(args.run_dir)
    emit_report(rows, format=args.format, path=args.output, long=args.long)
    print(f"{len(rows)} rows -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokenlens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", nargs="+", required=True, help="text or jsonl files")
        p.add_argument("--format", default="auto", choices=["auto", "text", "jsonl"])
        p.add_argument("--max-chars", type=int, default=None)

    p = sub.add_parser("train", help="train a tokenizer from scratch")
    add_corpus_args(p)
    p.add_argument("--family", required=True, choices=["bpe", "unigram", "wordpiece", "wordlevel"])
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-token-length", type=int, default=16)
    p.add_argument("--separator", default="\n")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("encode", help="tokenize text with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", nargs="*", default=[])
    p.add_argument("--format", default="auto", choices=["auto", "text", "jsonl"])
    p.add_argument("--max-chars", type=int, default=None)
    p.add_argument("--text", default=None, help="inline text instead of --input")
    p.add_argument("--output", required=True)
    p.add_argument("--packed", action="store_true")
    p.add_argument("--width", type=int, default=16, choices=[16, 32])
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="invert encode")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--packed", action="store_true")
    p.add_argument("--width", type=int, default=16, choices=[16, 32])
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("analyze", help="CR, tokens/char, k-gram entropies, utilization")
    add_corpus_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--max-k", type=int, default=5)
    p.add_argument("--estimator", default="plugin", choices=["plugin", "as-written"])
    p.add_argument("--renyi-alpha", type=float, default=2.0)
    p.add_argument("--nominal-vocab-size", type=int, default=None)
    p.add_argument("--lz", action="store_true", help="also compute raw/token bpc")
    p.add_argument("--compressors", default="gzip,zstd,lzma")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("lzpipe", help="raw-LZ vs token-LZ bits/char table")
    add_corpus_args(p)
    p.add_argument("--model", nargs="+", required=True, help="name=path or path")
    p.add_argument("--compressors", default="gzip,zstd,lzma")
    p.add_argument("--width", type=int, default=None, choices=[16, 32])
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_lzpipe)

    p = sub.add_parser("lzbpe-train", help="compression-aware BPE training")
    add_corpus_args(p)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--target-vocab", type=int, required=True)
    p.add_argument("--candidates", type=int, default=50)
    p.add_argument("--compressor", default="gzip", choices=list(ALGORITHMS))
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--trace", default=None, help="JSONL trace path")
    p.set_defaults(func=_cmd_lzbpe_train)

    p = sub.add_parser("bench-ranklist", help="pretrained rank-list tokenizers as compressors")
    p.add_argument("--ranklist", nargs="+", required=True, help="name=path rank-list files")
    p.add_argument("--input", nargs="+", required=True, help="domain=path corpora")
    p.add_argument("--format", default="auto", choices=["auto", "text", "jsonl"])
    p.add_argument("--docs", type=int, default=1000, help="documents per domain (taken in order)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_bench_ranklist)

    p = sub.add_parser("run", help="run a declarative experiment grid")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="merge cell reports into CSV/JSON")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--output", required=True)
    p.add_argument("--long", action="store_true", help="one (cell, metric) per row")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorpusError, TokenizerError, TrainingError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
