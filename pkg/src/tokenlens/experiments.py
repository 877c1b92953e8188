"""Declarative experiment grids: train/evaluate cells, cache, resume, report.

A config expands into one cell per (domain, family, vocab_size, train_size)
plus one per mismatch pair; every cell trains (or loads a cached) tokenizer,
evaluates the shared held-out test tail, and writes one report row. Reruns
with an unchanged config skip completed cells and reproduce reports
byte-identically.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CharStream, CorpusSplit, load_documents, split_train_test, stream_characters
from .lzpipe import get_compressor, raw_lz_bpc, token_lz_bpc, width_for_vocab
from .metrics import MetricsReport, analyze_stream
from .tokenizer import TokenizerModel, load_model, save_model
from .trainers import TrainConfig, train

TOOL_VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    name: str
    paths: tuple[str, ...]
    format: str = "auto"


@dataclass
class ExperimentConfig:
    domains: list[DomainSpec]
    families: list[str]
    vocab_sizes: list[int]
    train_sizes: list[int]
    test_chars: int
    mismatch_pairs: list[tuple[str, str]] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    compressors: list[str] = field(default_factory=list)
    compressor_levels: dict = field(default_factory=dict)
    output_dir: str = "runs/out"
    seed: int = 0
    separator: str = "\n"
    max_token_length: int = 16

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            domains = [
                DomainSpec(d["name"], tuple(d["paths"]), d.get("format", "auto"))
                for d in obj["domains"]
            ]
            cfg = cls(
                domains=domains,
                families=list(obj["families"]),
                vocab_sizes=[int(v) for v in obj["vocab_sizes"]],
                train_sizes=[int(n) for n in obj["train_sizes"]],
                test_chars=int(obj["test_chars"]),
                mismatch_pairs=[tuple(p) for p in obj.get("mismatch_pairs", [])],
                metrics=dict(obj.get("metrics", {})),
                compressors=list(obj.get("compressors", [])),
                compressor_levels=dict(obj.get("compressor_levels", {})),
                output_dir=obj.get("output_dir", "runs/out"),
                seed=int(obj.get("seed", 0)),
                separator=obj.get("separator", "\n"),
                max_token_length=int(obj.get("max_token_length", 16)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json_dict(obj)

    def validate(self) -> None:
        if not self.domains:
            raise ConfigError("no domains declared")
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate domain names: {names}")
        for d in self.domains:
            if not d.paths:
                raise ConfigError(f"domain {d.name} has no input paths")
            for p in d.paths:
                if not Path(p).is_file():
                    raise ConfigError(f"domain {d.name}: input path not found: {p}")
        if self.train_sizes != sorted(self.train_sizes):
            raise ConfigError(f"train_sizes must be ascending: {self.train_sizes}")
        if not self.families or not self.vocab_sizes or not self.train_sizes:
            raise ConfigError("families, vocab_sizes and train_sizes must be nonempty")
        for src, dst in self.mismatch_pairs:
            if src not in names or dst not in names:
                raise ConfigError(f"mismatch pair ({src}, {dst}) references undeclared domain")

    def canonical_json(self) -> str:
        obj = {
            "domains": [
                {"name": d.name, "paths": list(d.paths), "format": d.format}
                for d in self.domains
            ],
            "families": self.families,
            "vocab_sizes": self.vocab_sizes,
            "train_sizes": self.train_sizes,
            "test_chars": self.test_chars,
            "mismatch_pairs": [list(p) for p in self.mismatch_pairs],
            "metrics": self.metrics,
            "compressors": self.compressors,
            "compressor_levels": self.compressor_levels,
            "seed": self.seed,
            "separator": self.separator,
            "max_token_length": self.max_token_length,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = TOOL_VERSION
    cells: dict = field(default_factory=dict)  # cell id -> {status, seconds, error}

    def to_json_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "cells": self.cells,
        }

    @classmethod
    def load(cls, path: Path) -> "RunManifest | None":
        if not path.is_file():
            return None
        obj = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            config_hash=obj["config_hash"],
            tool_version=obj.get("tool_version", ""),
            cells=obj.get("cells", {}),
        )

    def save(self, path: Path) -> None:
        _atomic_write(path, json.dumps(self.to_json_dict(), indent=1, sort_keys=True))

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.cells.values() if c.get("status") == "failed")


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _load_domain_stream(spec: DomainSpec, cfg: ExperimentConfig) -> CharStream:
    docs = []
    for p in spec.paths:
        docs.extend(load_documents(p, format=spec.format))
    need = max(cfg.train_sizes) + cfg.test_chars
    return stream_characters(docs, need, separator=cfg.separator, source_id=spec.name)


def _cell_id(domain: str, test_domain: str, family: str, k: int, n: int) -> str:
    left = domain if domain == test_domain else f"{domain}--{test_domain}"
    return f"{left}__{family}__k{k}__n{n}"


def _evaluate_cell(
    model: TokenizerModel,
    test: CharStream,
    cfg: ExperimentConfig,
    domain: str,
    test_domain: str,
    family: str,
    k: int,
    n: int,
) -> MetricsReport:
    report = analyze_stream(
        model,
        test.text,
        max_k=int(cfg.metrics.get("max_k", 5)),
        estimator=cfg.metrics.get("estimator", "plugin"),
        renyi_alpha=float(cfg.metrics.get("renyi_alpha", 2.0)),
        nominal_vocab_size=k,
    )
    report.domain = domain
    report.test_domain = test_domain
    report.train_size = n
    report.family = family
    report.test_hash = test.content_hash()
    report.config_hash = ""
    report.seed = cfg.seed
    if cfg.compressors and cfg.metrics.get("lz", False):
        width = width_for_vocab(k)
        report.pack_width = width
        for name in cfg.compressors:
            comp = get_compressor(name, cfg.compressor_levels.get(name))
            report.bpc[f"raw_{name}"] = raw_lz_bpc(test.text, comp)
            report.bpc[f"token_{name}"] = token_lz_bpc(model, test.text, comp, width)
            report.compressor_levels[name] = comp.level
    return report


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    out = Path(cfg.output_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    chash = cfg.config_hash()
    manifest = RunManifest.load(manifest_path)
    if manifest is None or manifest.config_hash != chash:
        manifest = RunManifest(config_hash=chash)

    streams: dict[str, CharStream] = {}
    splits: dict[str, list[CorpusSplit]] = {}
    for spec in cfg.domains:
        streams[spec.name] = _load_domain_stream(spec, cfg)
        splits[spec.name] = split_train_test(streams[spec.name], cfg.train_sizes, cfg.test_chars)

    def model_path(domain: str, family: str, k: int, n: int) -> Path:
        return out / "models" / f"{domain}__{family}__k{k}__n{n}.json"

    def get_model(domain: str, family: str, k: int, n: int) -> TokenizerModel:
        path = model_path(domain, family, k, n)
        if path.is_file():
            return load_model(path)
        split = splits[domain][cfg.train_sizes.index(n)]
        model = train(
            split.train_prefix,
            TrainConfig(
                family=family,
                vocab_size=k,
                seed=cfg.seed,
                max_token_length=cfg.max_token_length,
            ),
        )
        tmp = path.with_suffix(".json.tmp")
        save_model(model, tmp)
        os.replace(tmp, path)
        return model

    cells: list[tuple[str, str, str, str, int, int]] = []
    for spec in cfg.domains:
        for family in cfg.families:
            for k in cfg.vocab_sizes:
                for n in cfg.train_sizes:
                    cells.append((_cell_id(spec.name, spec.name, family, k, n), spec.name, spec.name, family, k, n))
    for src, dst in cfg.mismatch_pairs:
        for family in cfg.families:
            for k in cfg.vocab_sizes:
                for n in cfg.train_sizes:
                    cells.append((_cell_id(src, dst, family, k, n), src, dst, family, k, n))

    for cell_id, domain, test_domain, family, k, n in cells:
        report_path = out / "reports" / f"{cell_id}.json"
        done = manifest.cells.get(cell_id, {}).get("status") == "done"
        if done and report_path.is_file():
            continue
        t0 = time.perf_counter()
        try:
            model = get_model(domain, family, k, n)
            test = splits[test_domain][0].test_tail
            report = _evaluate_cell(model, test, cfg, domain, test_domain, family, k, n)
            report.config_hash = chash
            _atomic_write(
                report_path,
                json.dumps(report.to_json_dict(), sort_keys=True, separators=(",", ":")),
            )
            manifest.cells[cell_id] = {
                "status": "done",
                "seconds": round(time.perf_counter() - t0, 3),
            }
        except Exception as exc:  # cell failures are recorded, the run continues
            manifest.cells[cell_id] = {
                "status": "failed",
                "seconds": round(time.perf_counter() - t0, 3),
                "error": f"{type(exc).__name__}: {exc}",
            }
        manifest.save(manifest_path)
    return manifest


def collect_reports(run_dir: str | Path) -> list[MetricsReport]:
    reports_dir = Path(run_dir) / "reports"
    rows = []
    for path in sorted(reports_dir.glob("*.json")):
        rows.append(MetricsReport.from_json_dict(json.loads(path.read_text(encoding="utf-8"))))
    return rows


def emit_report(
    rows: list[MetricsReport],
    format: str = "csv",
    path: str | Path = "report.csv",
    long: bool = False,
) -> None:
    """Write rows as CSV or JSON; ``long`` emits one (cell, metric, value) per row."""
    import csv

    if not rows:
        raise ConfigError("no report rows to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flats = [r.flat() for r in rows]
    id_fields = ["domain", "test_domain", "family", "vocab_size", "train_size", "estimator"]
    if long:
        long_rows = []
        for flat in flats:
            for key, value in flat.items():
                if key in id_fields:
                    continue
                long_rows.append({**{f: flat[f] for f in id_fields}, "metric": key, "value": value})
        flats = long_rows
        header = id_fields + ["metric", "value"]
    else:
        header = list(flats[0].keys())
        for flat in flats[1:]:
            for key in flat:
                if key not in header:
                    header.append(key)
    if format == "json":
        _atomic_write(path, json.dumps(flats, indent=1, sort_keys=False, default=str))
        return
    if format != "csv":
        raise ConfigError(f"unknown report format {format!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, restval="")
        writer.writeheader()
        for flat in flats:
            writer.writerow(flat)
