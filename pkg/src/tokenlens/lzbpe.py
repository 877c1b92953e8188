"""Compression-aware BPE: merges chosen to shrink a held-out validation stream.

Starts from the raw byte alphabet (ids 0..255). Each step counts adjacent
pairs on the training token stream, takes the top-K most frequent candidates,
simulates each merge on the validation stream (merge -> pack as little-endian
ints -> compress), and commits the one with the smallest compressed size.
Merges never cross pre-token boundaries, so with K=1 the committed sequence
is exactly the frequency-argmax sequence of the standard BPE trainer.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CharStream
from .lzpipe import Compressor, get_compressor, pack_token_ids
from .tokenizer import (
    SPECIAL_TOKENS,
    Preprocessing,
    TokenizerModel,
    TokenStream,
    Vocabulary,
    normalize,
    pretokenize,
)
from .trainers import PairCount

BYTE_ALPHABET = 256


class LzBpeError(ValueError):
    pass


def byte_tokenize(stream: CharStream | str, nfkc: bool = True) -> TokenStream:
    """Represent text as raw byte ids (0..255) with pre-token boundary marks."""
    text = stream.text if isinstance(stream, CharStream) else stream
    if nfkc:
        text = normalize(text)
    if not text:
        raise LzBpeError("empty stream")
    pieces = pretokenize(text)
    data = text.encode("utf-8")
    ids = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    starts = np.zeros(ids.size, dtype=bool)
    pos = 0
    for piece in pieces:
        starts[pos] = True
        pos += len(piece.encode("utf-8"))
    return TokenStream(
        ids=ids,
        source_chars=len(text),
        source_bytes=len(data),
        piece_starts=starts,
    )


def _pair_arrays(stream: TokenStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct adjacent pairs and their counts, skipping pre-token boundaries."""
    ids = stream.ids
    if ids.size < 2:
        raise LzBpeError(f"need at least 2 tokens to count pairs, got {ids.size}")
    left = ids[:-1]
    right = ids[1:]
    if stream.piece_starts is not None:
        mask = ~stream.piece_starts[1:]
        left = left[mask]
        right = right[mask]
    if left.size == 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64))
    max_id = int(max(left.max(), right.max()))
    base = max_id + 1
    if base * base <= (1 << 26):  # dense bincount fast path
        keys = left * base + right
        counts = np.bincount(keys, minlength=0)
        nz = np.flatnonzero(counts)
        return nz // base, nz % base, counts[nz]
    keys = (left.astype(np.int64) << np.int64(32)) | right.astype(np.int64)
    uniq, counts = np.unique(keys, return_counts=True)
    return (uniq >> np.int64(32)), (uniq & np.int64(0xFFFFFFFF)), counts


def pair_frequencies(stream: TokenStream) -> list[PairCount]:
    """Counts of all adjacent token pairs (within pre-token boundaries)."""
    lefts, rights, counts = _pair_arrays(stream)
    return [
        PairCount(int(l), int(r), int(c))
        for l, r, c in zip(lefts.tolist(), rights.tolist(), counts.tolist())
    ]


@dataclass(frozen=True)
class MergeCandidate:
    pair: tuple[int, int]
    train_count: int
    val_compressed_bytes: int | None = None


def top_k_candidates(
    counts: list[PairCount] | tuple[np.ndarray, np.ndarray, np.ndarray],
    k: int = 50,
) -> list[MergeCandidate]:
    """The k highest-count pairs; ties broken by lexicographic pair order."""
    if k < 1:
        raise LzBpeError(f"k must be >= 1, got {k}")
    if isinstance(counts, tuple):
        lefts, rights, cnts = counts
    else:
        if not counts:
            raise LzBpeError("no pairs to choose from")
        lefts = np.array([p.left for p in counts], dtype=np.int64)
        rights = np.array([p.right for p in counts], dtype=np.int64)
        cnts = np.array([p.count for p in counts], dtype=np.int64)
    if lefts.size == 0:
        raise LzBpeError("no pairs to choose from")
    order = np.lexsort((rights, lefts, -cnts))[:k]
    return [
        MergeCandidate(pair=(int(lefts[i]), int(rights[i])), train_count=int(cnts[i]))
        for i in order
    ]


def apply_merge(stream: TokenStream, pair: tuple[int, int], new_id: int) -> TokenStream:
    """Replace non-overlapping occurrences of pair left-to-right with new_id.

    Pure: the input stream is never mutated. Occurrences whose right token
    begins a pre-token are not merged.
    """
    ids = stream.ids
    left, right = pair
    if ids.size < 2:
        return TokenStream(ids, stream.source_chars, stream.source_bytes, stream.piece_starts)
    match = (ids[:-1] == left) & (ids[1:] == right)
    if stream.piece_starts is not None:
        match &= ~stream.piece_starts[1:]
    idx = np.flatnonzero(match)
    if idx.size == 0:
        return TokenStream(ids, stream.source_chars, stream.source_bytes, stream.piece_starts)
    if idx.size > 1:
        # left-to-right non-overlap: within runs of consecutive matches
        # (possible only when left == right) keep every other match
        new_run = np.empty(idx.size, dtype=bool)
        new_run[0] = True
        np.greater(np.diff(idx), 1, out=new_run[1:])
        run_start = np.maximum.accumulate(np.where(new_run, np.arange(idx.size), 0))
        idx = idx[(np.arange(idx.size) - run_start) % 2 == 0]
    out = ids.copy()
    out[idx] = new_id
    keep = np.ones(ids.size, dtype=bool)
    keep[idx + 1] = False
    starts = stream.piece_starts[keep] if stream.piece_starts is not None else None
    return TokenStream(out[keep], stream.source_chars, stream.source_bytes, starts)


def evaluate_candidate(
    candidate: MergeCandidate,
    val_stream: TokenStream,
    compressor: Compressor,
    width: int = 16,
    new_id: int | None = None,
) -> int:
    """Compressed size (bytes) of the validation stream after simulating the merge.

    Side-effect free: the validation stream itself is never modified.
    """
    if new_id is None:
        new_id = int(val_stream.ids.max()) + 1
    merged = apply_merge(val_stream, candidate.pair, new_id)
    packed = pack_token_ids(merged, width)
    return len(compressor.compress(packed.data))


@dataclass
class MergeRecord:
    step: int
    vocab_size: int
    chosen: tuple[int, int]
    new_id: int
    train_count: int
    val_size_before: int
    val_size_after: int
    size_increased: bool
    seconds: float
    candidates: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "step": self.step,
            "vocab_size": self.vocab_size,
            "chosen": list(self.chosen),
            "new_id": self.new_id,
            "train_count": self.train_count,
            "val_size_before": self.val_size_before,
            "val_size_after": self.val_size_after,
            "size_increased": self.size_increased,
            "seconds": self.seconds,
            "candidates": self.candidates,
        }


@dataclass
class LzBpeTrace:
    records: list[MergeRecord]
    baseline_val_size: int
    compressor: str
    level: int
    pack_width: int
    early_stop: str = ""

    def final_val_size(self) -> int:
        return self.records[-1].val_size_after if self.records else self.baseline_val_size

    def improvement(self) -> float:
        """Fractional reduction of validation compressed size vs the byte baseline."""
        return 1.0 - self.final_val_size() / self.baseline_val_size

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            meta = {
                "type": "meta",
                "baseline_val_size": self.baseline_val_size,
                "compressor": self.compressor,
                "level": self.level,
                "pack_width": self.pack_width,
                "early_stop": self.early_stop,
            }
            fh.write(json.dumps(meta) + "\n")
            for rec in self.records:
                fh.write(json.dumps(rec.to_json_dict()) + "\n")


def train_lz_aware_bpe(
    train: CharStream | str,
    val: CharStream | str,
    target_vocab: int,
    candidates: int = 50,
    compressor: Compressor | None = None,
    width: int = 16,
    nfkc: bool = True,
    min_pair_count: int = 2,
    keep_candidate_sizes: bool = True,
) -> tuple[TokenizerModel, LzBpeTrace]:
    """Greedy merge selection minimizing validation compressed size.

    Both streams are maintained incrementally: a committed merge is applied
    once to each. Ties among equal validation sizes prefer the higher
    training count, then the lexicographically smallest pair.
    """
    if not (BYTE_ALPHABET < target_vocab <= (1 << 16)):
        raise LzBpeError(
            f"target_vocab must be in (256, 65536] for 16-bit packing, got {target_vocab}"
        )
    comp = compressor if compressor is not None else get_compressor("gzip")
    train_stream = byte_tokenize(train, nfkc=nfkc)
    val_stream = byte_tokenize(val, nfkc=nfkc)

    vocab_bytes: list[bytes] = [bytes([b]) for b in range(BYTE_ALPHABET)]
    merges_raw: list[tuple[int, int]] = []
    baseline = len(comp.compress(pack_token_ids(val_stream, width).data))
    val_size = baseline
    records: list[MergeRecord] = []
    early_stop = ""

    while BYTE_ALPHABET + len(merges_raw) < target_vocab:
        t0 = time.perf_counter()
        lefts, rights, cnts = _pair_arrays(train_stream)
        eligible = cnts >= min_pair_count
        if not eligible.any():
            early_stop = "no pair meets the minimum count"
            break
        cands = top_k_candidates((lefts[eligible], rights[eligible], cnts[eligible]), candidates)
        new_id = BYTE_ALPHABET + len(merges_raw)
        evaluated: list[MergeCandidate] = []
        for cand in cands:
            size = evaluate_candidate(cand, val_stream, comp, width, new_id)
            evaluated.append(
                MergeCandidate(cand.pair, cand.train_count, val_compressed_bytes=size)
            )
        best = min(
            evaluated,
            key=lambda c: (c.val_compressed_bytes, -c.train_count, c.pair),
        )
        train_stream = apply_merge(train_stream, best.pair, new_id)
        val_stream = apply_merge(val_stream, best.pair, new_id)
        vocab_bytes.append(vocab_bytes[best.pair[0]] + vocab_bytes[best.pair[1]])
        merges_raw.append(best.pair)
        new_size = int(best.val_compressed_bytes)  # type: ignore[arg-type]
        records.append(
            MergeRecord(
                step=len(merges_raw),
                vocab_size=BYTE_ALPHABET + len(merges_raw),
                chosen=best.pair,
                new_id=new_id,
                train_count=best.train_count,
                val_size_before=val_size,
                val_size_after=new_size,
                size_increased=new_size > val_size,
                seconds=time.perf_counter() - t0,
                candidates=[
                    {
                        "pair": list(c.pair),
                        "train_count": c.train_count,
                        "val_bytes": c.val_compressed_bytes,
                    }
                    for c in evaluated
                ]
                if keep_candidate_sizes
                else [],
            )
        )
        val_size = new_size

    model = _export_model(vocab_bytes, merges_raw, nfkc)
    trace = LzBpeTrace(
        records=records,
        baseline_val_size=baseline,
        compressor=comp.algorithm,
        level=comp.level,
        pack_width=width,
        early_stop=early_stop,
    )
    return model, trace


def _export_model(vocab_bytes: list[bytes], merges_raw: list[tuple[int, int]], nfkc: bool) -> TokenizerModel:
    """Renumber the raw byte id space into the standard vocabulary layout."""
    offset = len(SPECIAL_TOKENS)
    tokens: list[str | bytes] = list(SPECIAL_TOKENS) + list(vocab_bytes)
    merges = [(l + offset, r + offset) for l, r in merges_raw]
    return TokenizerModel(
        family="bpe",
        vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS),
        merges=merges,
        preprocessing=Preprocessing(nfkc=nfkc, pretokenizer="whitespace"),
        byte_level=True,
        provenance="lz-aware",
    )
