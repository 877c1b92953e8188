"""Information-theoretic measurements over token streams and raw text.

All entropies are in bits (log base 2). k-gram conditional entropies drop the
first k-1 positions (whose context is undefined) and normalize over the
n-k+1 predicted positions. Two estimators are exposed:

* ``plugin``: mean surprisal, (1/(n-k+1)) * sum_i -log2 p(t_i | ctx_i); this
  is the standard plug-in conditional entropy and drives headline numbers.
* ``as-written``: (1/(n-k+1)) * sum_i [-p(t_i|ctx_i) * log2 p(t_i|ctx_i)],
  which weights each position's surprisal by the conditional probability
  itself. It is never larger than ``plugin``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import Document
from .tokenizer import TokenizerModel, TokenStream, encode, prepare_text

SCHEMA_VERSION = 1

ESTIMATORS = ("plugin", "as-written")


class MetricsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Distributions


@dataclass
class EmpiricalDistribution:
    """Token counts with their total; all stored counts are positive."""

    counts: dict[int, int]
    total: int

    def __post_init__(self) -> None:
        if self.total != sum(self.counts.values()):
            raise MetricsError("total does not match counts")
        if any(c <= 0 for c in self.counts.values()):
            raise MetricsError("counts must be positive")

    @classmethod
    def from_stream(cls, stream: TokenStream | Sequence[int]) -> "EmpiricalDistribution":
        ids = stream.ids if isinstance(stream, TokenStream) else np.asarray(stream, dtype=np.int64)
        if ids.size == 0:
            raise MetricsError("empty token stream")
        values, counts = np.unique(ids, return_counts=True)
        return cls(
            counts={int(v): int(c) for v, c in zip(values, counts)},
            total=int(ids.size),
        )

    def probabilities(self) -> np.ndarray:
        return np.fromiter(self.counts.values(), dtype=np.float64) / self.total


def shannon_entropy(dist: EmpiricalDistribution) -> float:
    p = dist.probabilities()
    return float(-(p * np.log2(p)).sum())


def renyi_entropy(dist: EmpiricalDistribution, alpha: float = 2.0) -> float:
    """Renyi entropy of order alpha; alpha=2 is collision entropy."""
    if alpha <= 0 or alpha == 1.0:
        raise MetricsError(f"alpha must be positive and != 1, got {alpha}")
    p = dist.probabilities()
    return float(np.log2((p**alpha).sum()) / (1.0 - alpha))


def unigram_entropy(stream: TokenStream | Sequence[int]) -> float:
    """Plug-in Shannon entropy of the token distribution, in bits."""
    return shannon_entropy(EmpiricalDistribution.from_stream(stream))


# ---------------------------------------------------------------------------
# k-gram tables and conditional entropies


class KGramTable:
    """Counts of length-k windows and their length-(k-1) prefixes.

    Built vectorized: contexts are deduplicated with np.unique and joints are
    grouped through packed (context index, next symbol) integer keys, so the
    sum over the last symbol of the joint counts equals the context count by
    construction.
    """

    def __init__(self, k: int, ids: np.ndarray):
        n = int(ids.size)
        if k < 1:
            raise MetricsError(f"k must be >= 1, got {k}")
        if n < k:
            raise MetricsError(f"stream of {n} tokens is shorter than k={k}")
        self.k = k
        self.n_positions = n - k + 1
        windows = sliding_window_view(ids, k)
        if k == 1:
            ctx_inverse = np.zeros(self.n_positions, dtype=np.int64)
            self._unique_ctx = np.zeros((1, 0), dtype=ids.dtype)
        else:
            self._unique_ctx, ctx_inverse = np.unique(
                windows[:, :-1], axis=0, return_inverse=True
            )
            ctx_inverse = ctx_inverse.astype(np.int64)
        self._ctx_counts = np.bincount(ctx_inverse)
        last = windows[:, -1].astype(np.int64)
        if last.size and (last.min() < 0 or last.max() >= 2**32):
            raise MetricsError("token ids must fit in 32 bits")
        keys = (ctx_inverse << np.int64(32)) | last
        unique_keys, joint_counts = np.unique(keys, return_counts=True)
        self._joint_ctx = (unique_keys >> np.int64(32)).astype(np.int64)
        self._joint_last = (unique_keys & np.int64(0xFFFFFFFF)).astype(np.int64)
        self._joint_counts = joint_counts.astype(np.int64)

    @classmethod
    def from_stream(cls, stream: TokenStream | Sequence[int], k: int) -> "KGramTable":
        ids = stream.ids if isinstance(stream, TokenStream) else np.asarray(stream, dtype=np.int64)
        return cls(k, ids)

    def context_counts(self) -> dict[tuple[int, ...], int]:
        return {
            tuple(int(x) for x in self._unique_ctx[i]): int(self._ctx_counts[i])
            for i in range(len(self._ctx_counts))
        }

    def joint_counts(self) -> dict[tuple[int, ...], int]:
        out: dict[tuple[int, ...], int] = {}
        for ci, last, c in zip(self._joint_ctx, self._joint_last, self._joint_counts):
            ctx = tuple(int(x) for x in self._unique_ctx[ci])
            out[ctx + (int(last),)] = int(c)
        return out

    def conditional_entropy(self, estimator: str = "plugin") -> float:
        if estimator not in ESTIMATORS:
            raise MetricsError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
        jc = self._joint_counts.astype(np.float64)
        cc = self._ctx_counts[self._joint_ctx].astype(np.float64)
        p = jc / cc
        surprisal = -np.log2(p)
        if estimator == "plugin":
            total = float((jc * surprisal).sum())
        else:
            total = float((jc * p * surprisal).sum())
        return total / self.n_positions


def kgram_entropy(
    stream: TokenStream | Sequence[int], k: int, estimator: str = "plugin"
) -> float:
    """Empirical conditional entropy of a token given its k-1 predecessors."""
    if not 1 <= k <= 5:
        raise MetricsError(f"k must be in 1..5, got {k}")
    return KGramTable.from_stream(stream, k).conditional_entropy(estimator)


def entropy_rate(h_k: float, tokens_per_char: float) -> float:
    """Convert bits/token to bits/char."""
    if h_k < 0 or tokens_per_char < 0:
        raise MetricsError("entropy rate inputs must be nonnegative")
    return h_k * tokens_per_char


# ---------------------------------------------------------------------------
# Capacity utilization, correlation, redundancy


def capacity_utilization(h: float, vocab_size: int) -> float:
    """Fraction of the noiseless K-ary channel used: h / log2(K)."""
    if vocab_size < 2:
        raise MetricsError(f"vocab_size must be >= 2, got {vocab_size}")
    if h < 0:
        raise MetricsError(f"entropy must be nonnegative, got {h}")
    return h / math.log2(vocab_size)


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricsError("xs and ys must be 1-D with equal length")
    if x.size < 2:
        raise MetricsError("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    if sx == 0.0 or sy == 0.0:
        raise MetricsError("correlation undefined: zero variance input")
    return float((dx * dy).sum() / math.sqrt(sx * sy))


def redundancy_bound(vocab_size: int, n: int) -> float:
    """Per-symbol universal-coding redundancy bound (K-1)/(2n) * log2(n)."""
    if vocab_size < 1:
        raise MetricsError(f"vocab_size must be >= 1, got {vocab_size}")
    if n < 2:
        raise MetricsError(f"n must be >= 2, got {n}")
    return (vocab_size - 1) / (2.0 * n) * math.log2(n)


# ---------------------------------------------------------------------------
# Corpus-level tokenizer metrics


def _texts(corpus: Iterable[Document | str]) -> list[str]:
    out = []
    for item in corpus:
        out.append(item if isinstance(item, str) else item.text)
    if not out:
        raise MetricsError("empty corpus")
    return out


def compression_ratio(model: TokenizerModel, corpus: Iterable[Document | str]) -> float:
    """UTF-8 bytes per token over the corpus; larger is more compressive."""
    total_bytes = 0
    total_tokens = 0
    for text in _texts(corpus):
        prepared = prepare_text(model, text)
        total_bytes += len(prepared.encode("utf-8"))
        total_tokens += encode(model, prepared).n
    if total_tokens == 0:
        raise MetricsError("corpus produced zero tokens")
    return total_bytes / total_tokens


def tokens_per_char(model: TokenizerModel, corpus: Iterable[Document | str]) -> float:
    total_chars = 0
    total_tokens = 0
    for text in _texts(corpus):
        prepared = prepare_text(model, text)
        total_chars += len(prepared)
        total_tokens += encode(model, prepared).n
    if total_chars == 0:
        raise MetricsError("corpus has zero characters")
    return total_tokens / total_chars


def intrinsic_compressibility(text: str, compressor) -> float:
    """Bits per character of the compressed raw UTF-8 bytes."""
    if not text:
        raise MetricsError("empty text")
    compressed = compressor.compress(text.encode("utf-8"))
    return 8.0 * len(compressed) / len(text)


# ---------------------------------------------------------------------------
# Report records


@dataclass
class MetricsReport:
    """One (tokenizer, corpus) measurement cell, serializable to JSON/CSV."""

    domain: str
    family: str
    vocab_size: int
    train_size: int
    test_domain: str
    estimator: str = "plugin"
    cr: float = float("nan")
    tokens_per_char: float = float("nan")
    bytes_per_char: float = float("nan")
    h: dict[int, float] = field(default_factory=dict)
    h_rates: dict[int, float] = field(default_factory=dict)
    eta: float = float("nan")
    eta_alpha: float = float("nan")
    renyi_alpha: float = 2.0
    bpc: dict[str, float] = field(default_factory=dict)
    compressor_levels: dict[str, int] = field(default_factory=dict)
    pack_width: int = 16
    test_hash: str = ""
    config_hash: str = ""
    seed: int = 0
    skipped_docs: int = 0
    schema_version: int = SCHEMA_VERSION

    def flat(self) -> dict:
        """Flatten to a stable-ordered scalar mapping (one CSV row)."""
        row: dict = {
            "schema_version": self.schema_version,
            "domain": self.domain,
            "family": self.family,
            "vocab_size": self.vocab_size,
            "train_size": self.train_size,
            "test_domain": self.test_domain,
            "estimator": self.estimator,
            "cr": self.cr,
            "tokens_per_char": self.tokens_per_char,
            "bytes_per_char": self.bytes_per_char,
        }
        for k in range(1, 6):
            row[f"h{k}"] = self.h.get(k, float("nan"))
        for k in range(1, 6):
            row[f"h{k}_rate"] = self.h_rates.get(k, float("nan"))
        row["eta"] = self.eta
        row["eta_alpha"] = self.eta_alpha
        row["renyi_alpha"] = self.renyi_alpha
        for key in sorted(self.bpc):
            row[f"bpc_{key}"] = self.bpc[key]
        for key in sorted(self.compressor_levels):
            row[f"level_{key}"] = self.compressor_levels[key]
        row["pack_width"] = self.pack_width
        row["test_hash"] = self.test_hash
        row["config_hash"] = self.config_hash
        row["seed"] = self.seed
        row["skipped_docs"] = self.skipped_docs
        return row

    def to_json_dict(self) -> dict:
        obj = dict(self.__dict__)
        obj["h"] = {str(k): v for k, v in self.h.items()}
        obj["h_rates"] = {str(k): v for k, v in self.h_rates.items()}
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MetricsReport":
        obj = dict(obj)
        obj["h"] = {int(k): float(v) for k, v in obj.get("h", {}).items()}
        obj["h_rates"] = {int(k): float(v) for k, v in obj.get("h_rates", {}).items()}
        return cls(**obj)


def analyze_stream(
    model: TokenizerModel,
    text: str,
    max_k: int = 5,
    estimator: str = "plugin",
    renyi_alpha: float = 2.0,
    nominal_vocab_size: int | None = None,
) -> MetricsReport:
    """Tokenize once and derive CR, tokens/char, H_1..H_k, rates, eta, eta_alpha.

    H_1 is always the plug-in unigram entropy; orders >= 2 use ``estimator``.
    ``nominal_vocab_size`` sets the channel size K for eta; it defaults to the
    model's actual vocabulary but should be the configured target size when a
    trainer stopped early, so utilization reflects the fixed K-ary channel.
    """
    prepared = prepare_text(model, text)
    stream = encode(model, prepared)
    if stream.n == 0:
        raise MetricsError("text produced zero tokens")
    k_channel = nominal_vocab_size if nominal_vocab_size is not None else model.vocab.size
    chars = len(prepared)
    nbytes = len(prepared.encode("utf-8"))
    tpc = stream.n / chars
    report = MetricsReport(
        domain="",
        family=model.family,
        vocab_size=k_channel,
        train_size=0,
        test_domain="",
        estimator=estimator,
        cr=nbytes / stream.n,
        tokens_per_char=tpc,
        bytes_per_char=nbytes / chars,
        renyi_alpha=renyi_alpha,
    )
    dist = EmpiricalDistribution.from_stream(stream)
    report.h[1] = shannon_entropy(dist)
    for k in range(2, max_k + 1):
        if stream.n < k:
            break
        report.h[k] = kgram_entropy(stream, k, estimator)
    report.h_rates = {k: entropy_rate(v, tpc) for k, v in report.h.items()}
    report.eta = capacity_utilization(report.h[1], k_channel)
    report.eta_alpha = capacity_utilization(renyi_entropy(dist, renyi_alpha), k_channel)
    return report
