"""Train the four tokenizer families from scratch on a character stream.

All trainers share one preprocessing pipeline (optional NFKC, whitespace
pretokenization with leading-space markers) and a fixed special-token block
at ids 0-3. Training is deterministic: ties among equal-count pairs resolve
to the lowest (left id, right id), and corpora are reduced to unique-piece
counts so results are independent of sharding.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field

from .corpus import CharStream
from .tokenizer import (
    SPECIAL_TOKENS,
    UNK_ID,
    Preprocessing,
    TokenizerModel,
    Vocabulary,
    WORDPIECE_CONTINUATION,
    normalize,
    pretokenize,
)

NEG_INF = float("-inf")


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    family: str
    vocab_size: int
    specials: tuple[str, ...] = SPECIAL_TOKENS
    max_token_length: int = 16
    seed: int = 0
    min_pair_count: int = 2
    nfkc: bool = True
    unigram_seed_multiplier: int = 10
    unigram_prune_fraction: float = 0.2
    unigram_em_iterations: int = 2


@dataclass(frozen=True)
class PairCount:
    left: int
    right: int
    count: int


def piece_counts_for(stream: CharStream | str, cfg: TrainConfig) -> Counter:
    """Unique pre-token pieces with multiplicities, after preprocessing."""
    text = stream.text if isinstance(stream, CharStream) else stream
    if cfg.nfkc:
        text = normalize(text)
    counts: Counter = Counter(pretokenize(text))
    if not counts:
        raise TrainingError("training stream is empty")
    return counts


def _preprocessing(cfg: TrainConfig) -> Preprocessing:
    return Preprocessing(nfkc=cfg.nfkc, pretokenizer="whitespace")


def train(stream: CharStream | str, cfg: TrainConfig) -> TokenizerModel:
    if cfg.family == "bpe":
        return train_bpe(stream, cfg)
    if cfg.family == "wordlevel":
        return train_wordlevel(stream, cfg)
    if cfg.family == "wordpiece":
        return train_wordpiece(stream, cfg)
    if cfg.family == "unigram":
        return train_unigram(stream, cfg)
    raise TrainingError(f"unknown trainable family: {cfg.family!r}")


# ---------------------------------------------------------------------------
# Byte-level BPE


def _rewrite_piece(seq: list[int], left: int, right: int, new_id: int) -> list[int]:
    out: list[int] = []
    i = 0
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == left and seq[i + 1] == right:
            out.append(new_id)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_bpe(stream: CharStream | str, cfg: TrainConfig) -> TokenizerModel:
    """Iteratively merge the most frequent adjacent pair within pieces.

    Init vocabulary: specials + all 256 byte tokens. Stops at the target
    vocabulary size or when no pair occurs at least ``min_pair_count`` times.
    """
    n_base = len(cfg.specials) + 256
    if cfg.vocab_size <= n_base:
        raise TrainingError(
            f"vocab_size must exceed specials + byte alphabet ({n_base}), got {cfg.vocab_size}"
        )
    piece_counts = piece_counts_for(stream, cfg)
    tokens: list[str | bytes] = list(cfg.specials) + [bytes([b]) for b in range(256)]
    byte_base = len(cfg.specials)

    seqs: list[list[int]] = []
    weights: list[int] = []
    for piece, w in piece_counts.items():
        seqs.append([byte_base + b for b in piece.encode("utf-8")])
        weights.append(w)

    pair_counts: dict[tuple[int, int], int] = {}
    pair_pieces: dict[tuple[int, int], set[int]] = {}
    for pi, seq in enumerate(seqs):
        w = weights[pi]
        for pair in zip(seq, seq[1:]):
            pair_counts[pair] = pair_counts.get(pair, 0) + w
            pair_pieces.setdefault(pair, set()).add(pi)

    heap = [(-c, l, r) for (l, r), c in pair_counts.items()]
    heapq.heapify(heap)
    merges: list[tuple[int, int]] = []

    while len(tokens) < cfg.vocab_size and heap:
        negc, left, right = heapq.heappop(heap)
        current = pair_counts.get((left, right))
        if current is None or current != -negc:
            continue  # stale heap entry
        if current < cfg.min_pair_count:
            break
        new_id = len(tokens)
        tokens.append(tokens[left] + tokens[right])  # type: ignore[operator]
        merges.append((left, right))
        pair = (left, right)
        affected = sorted(pair_pieces.pop(pair, ()))
        del pair_counts[pair]
        deltas: dict[tuple[int, int], int] = {}
        for pi in affected:
            seq = seqs[pi]
            w = weights[pi]
            new_seq = _rewrite_piece(seq, left, right, new_id)
            for p in zip(seq, seq[1:]):
                deltas[p] = deltas.get(p, 0) - w
            for p in zip(new_seq, new_seq[1:]):
                deltas[p] = deltas.get(p, 0) + w
            old_pairs = set(zip(seq, seq[1:]))
            new_pairs = set(zip(new_seq, new_seq[1:]))
            for p in old_pairs - new_pairs:
                members = pair_pieces.get(p)
                if members is not None:
                    members.discard(pi)
            for p in new_pairs - old_pairs:
                pair_pieces.setdefault(p, set()).add(pi)
            seqs[pi] = new_seq
        for p, d in deltas.items():
            if d == 0 or p == pair:
                continue
            c = pair_counts.get(p, 0) + d
            if c <= 0:
                pair_counts.pop(p, None)
                pair_pieces.pop(p, None)
            else:
                pair_counts[p] = c
                heapq.heappush(heap, (-c, p[0], p[1]))

    return TokenizerModel(
        family="bpe",
        vocab=Vocabulary(tokens, specials=cfg.specials),
        merges=merges,
        preprocessing=_preprocessing(cfg),
        byte_level=True,
        trainer={"seed": cfg.seed, "min_pair_count": cfg.min_pair_count},
    )


# ---------------------------------------------------------------------------
# WordLevel


def train_wordlevel(stream: CharStream | str, cfg: TrainConfig) -> TokenizerModel:
    """Vocabulary = specials + the most frequent whole words (ties: lexicographic)."""
    if cfg.vocab_size <= len(cfg.specials):
        raise TrainingError(f"vocab_size must exceed {len(cfg.specials)} specials")
    piece_counts = piece_counts_for(stream, cfg)
    word_counts: Counter = Counter()
    for piece, w in piece_counts.items():
        word = piece.strip()
        if word:
            word_counts[word] += w
    if not word_counts:
        raise TrainingError("training stream contains no words")
    budget = cfg.vocab_size - len(cfg.specials)
    chosen = sorted(word_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:budget]
    tokens: list[str | bytes] = list(cfg.specials) + [w for w, _ in chosen]
    return TokenizerModel(
        family="wordlevel",
        vocab=Vocabulary(tokens, specials=cfg.specials),
        preprocessing=_preprocessing(cfg),
        byte_level=False,
        trainer={"seed": cfg.seed},
    )


# ---------------------------------------------------------------------------
# WordPiece


def _wordpiece_units(piece: str) -> list[str]:
    return [piece[0]] + [WORDPIECE_CONTINUATION + ch for ch in piece[1:]]


def _wordpiece_merge_name(left: str, right: str) -> str:
    if right.startswith(WORDPIECE_CONTINUATION):
        right = right[len(WORDPIECE_CONTINUATION) :]
    return left + right


def train_wordpiece(stream: CharStream | str, cfg: TrainConfig) -> TokenizerModel:
    """Grow the vocabulary by the pair maximizing count(pair)/(count(l)*count(r)).

    Word-initial units keep their leading-space marker; continuations carry
    the ``##`` prefix. Pairs below ``min_pair_count`` are never merged.
    """
    import numpy as np

    piece_counts = piece_counts_for(stream, cfg)
    unit_index: dict[str, int] = {}
    units: list[str] = []

    def unit_id(u: str) -> int:
        uid = unit_index.get(u)
        if uid is None:
            uid = len(units)
            unit_index[u] = uid
            units.append(u)
        return uid

    # deterministic alphabet order: first by whole-corpus piece sort
    seqs: list[list[int]] = []
    weights: list[int] = []
    for piece in sorted(piece_counts):
        w = piece_counts[piece]
        seqs.append([unit_id(u) for u in _wordpiece_units(piece)])
        weights.append(w)
    n_alphabet = len(units)
    if cfg.vocab_size <= len(cfg.specials) + n_alphabet:
        raise TrainingError(
            f"vocab_size {cfg.vocab_size} too small: needs > "
            f"{len(cfg.specials)} specials + {n_alphabet} alphabet units"
        )
    budget = cfg.vocab_size - len(cfg.specials)

    capacity = 1 << 12
    unit_counts = np.zeros(capacity, dtype=np.int64)
    for seq, w in zip(seqs, weights):
        for uid in seq:
            unit_counts[uid] += w

    pair_index: dict[tuple[int, int], int] = {}
    pleft: list[int] = []
    pright: list[int] = []
    pcount: list[int] = []
    pair_pieces: dict[tuple[int, int], set[int]] = {}

    def pair_slot(pair: tuple[int, int]) -> int:
        slot = pair_index.get(pair)
        if slot is None:
            slot = len(pleft)
            pair_index[pair] = slot
            pleft.append(pair[0])
            pright.append(pair[1])
            pcount.append(0)
        return slot

    for pi, seq in enumerate(seqs):
        w = weights[pi]
        for pair in zip(seq, seq[1:]):
            pcount[pair_slot(pair)] += w
            pair_pieces.setdefault(pair, set()).add(pi)

    merges: list[tuple[int, int]] = []
    while len(units) < budget and pair_index:
        if len(units) + 1 > unit_counts.size:
            unit_counts = np.concatenate([unit_counts, np.zeros(unit_counts.size, dtype=np.int64)])
        la = np.asarray(pleft, dtype=np.int64)
        ra = np.asarray(pright, dtype=np.int64)
        ca = np.asarray(pcount, dtype=np.float64)
        denom = unit_counts[la] * unit_counts[ra]
        valid = (ca >= cfg.min_pair_count) & (denom > 0)
        if not valid.any():
            break
        scores = np.where(valid, ca / np.where(denom > 0, denom, 1), NEG_INF)
        best_score = scores.max()
        candidates = np.flatnonzero(scores == best_score)
        slot = min(candidates, key=lambda s: (pleft[s], pright[s]))
        left, right = pleft[slot], pright[slot]
        pair = (left, right)

        new_uid = unit_id(_wordpiece_merge_name(units[left], units[right]))
        merges.append(pair)
        affected = sorted(pair_pieces.pop(pair, ()))
        deltas: dict[tuple[int, int], int] = {}
        merged_occurrences = 0
        for pi in affected:
            seq = seqs[pi]
            w = weights[pi]
            new_seq = _rewrite_piece(seq, left, right, new_uid)
            n_merged = len(seq) - len(new_seq)
            merged_occurrences += n_merged * w
            for p in zip(seq, seq[1:]):
                deltas[p] = deltas.get(p, 0) - w
            for p in zip(new_seq, new_seq[1:]):
                deltas[p] = deltas.get(p, 0) + w
            old_pairs = set(zip(seq, seq[1:]))
            new_pairs = set(zip(new_seq, new_seq[1:]))
            for p in old_pairs - new_pairs:
                members = pair_pieces.get(p)
                if members is not None:
                    members.discard(pi)
            for p in new_pairs - old_pairs:
                pair_pieces.setdefault(p, set()).add(pi)
            seqs[pi] = new_seq
        unit_counts[left] -= merged_occurrences
        unit_counts[right] -= merged_occurrences
        unit_counts[new_uid] += merged_occurrences
        pcount[slot] = 0
        del pair_index[pair]
        for p, d in deltas.items():
            if d == 0 or p == pair:
                continue
            s = pair_slot(p)
            pcount[s] += d
            if pcount[s] <= 0:
                pcount[s] = 0
                pair_index.pop(p, None)
                pair_pieces.pop(p, None)
            else:
                pair_pieces.setdefault(p, set())

    tokens: list[str | bytes] = list(cfg.specials) + units
    offset = len(cfg.specials)
    return TokenizerModel(
        family="wordpiece",
        vocab=Vocabulary(tokens, specials=cfg.specials),
        merges=[(l + offset, r + offset) for l, r in merges],
        preprocessing=_preprocessing(cfg),
        byte_level=False,
        trainer={"seed": cfg.seed, "min_pair_count": cfg.min_pair_count},
    )


# ---------------------------------------------------------------------------
# Unigram


def _log_add(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _piece_arcs(piece: str, unit_index: dict[str, int], max_len: int):
    """All (start, end, unit id) lattice arcs, grouped for both DP sweeps."""
    n = len(piece)
    by_end: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
    by_start: list[list[tuple[int, int]]] = [[] for _ in range(n + 1)]
    for i in range(n):
        hi = min(n, i + max_len)
        for j in range(i + 1, hi + 1):
            uid = unit_index.get(piece[i:j])
            if uid is not None:
                by_end[j].append((i, uid))
                by_start[i].append((j, uid))
    return by_end, by_start


def _forward_logZ(piece: str, by_end, log_probs: list[float]) -> float:
    n = len(piece)
    alpha = [NEG_INF] * (n + 1)
    alpha[0] = 0.0
    for j in range(1, n + 1):
        acc = NEG_INF
        for i, uid in by_end[j]:
            if alpha[i] != NEG_INF:
                acc = _log_add(acc, alpha[i] + log_probs[uid])
        alpha[j] = acc
    return alpha[n]


def _viterbi_best(piece: str, unit_index, log_probs, max_len: int, exclude: int = -1) -> float:
    n = len(piece)
    best = [NEG_INF] * (n + 1)
    best[0] = 0.0
    for j in range(1, n + 1):
        lo = max(0, j - max_len)
        for i in range(lo, j):
            if best[i] == NEG_INF:
                continue
            uid = unit_index.get(piece[i:j])
            if uid is None or uid == exclude:
                continue
            cand = best[i] + log_probs[uid]
            if cand > best[j]:
                best[j] = cand
    return best[n]


def train_unigram(stream: CharStream | str, cfg: TrainConfig) -> TokenizerModel:
    """EM over segmentation lattices with periodic lowest-impact pruning.

    Seed vocabulary: every substring up to ``max_token_length`` occurring at
    least twice, capped at ``unigram_seed_multiplier * vocab_size`` candidates
    ranked by count*length. Single characters are never pruned. Each round
    runs ``unigram_em_iterations`` EM updates then drops the
    ``unigram_prune_fraction`` of multi-character units with the least
    likelihood impact, until the vocabulary fits.
    """
    piece_counts = piece_counts_for(stream, cfg)
    pieces = sorted(piece_counts)
    weights = [piece_counts[p] for p in pieces]

    chars = sorted({ch for p in pieces for ch in p})
    n_specials = len(cfg.specials)
    if cfg.vocab_size < n_specials + len(chars):
        raise TrainingError(
            f"vocab_size {cfg.vocab_size} below alphabet size "
            f"({len(chars)} chars + {n_specials} specials)"
        )
    target_units = cfg.vocab_size - n_specials

    sub_counts: Counter = Counter()
    for piece, w in zip(pieces, weights):
        n = len(piece)
        for i in range(n):
            hi = min(n, i + cfg.max_token_length)
            for j in range(i + 2, hi + 1):
                sub_counts[piece[i:j]] += w
    seeds = [(s, c) for s, c in sub_counts.items() if c >= 2]
    seeds.sort(key=lambda sc: (-sc[1] * len(sc[0]), sc[0]))
    seed_cap = max(cfg.unigram_seed_multiplier * cfg.vocab_size - len(chars), 0)
    seeds = seeds[:seed_cap]

    units: list[str] = list(chars) + [s for s, _ in seeds if len(s) > 1]
    char_counts: Counter = Counter()
    for piece, w in zip(pieces, weights):
        for ch in piece:
            char_counts[ch] += w
    init_counts = [float(char_counts[u]) if len(u) == 1 else float(sub_counts[u]) for u in units]
    total0 = sum(init_counts)
    log_probs = [math.log(c / total0) if c > 0 else -100.0 for c in init_counts]
    unit_index = {u: i for i, u in enumerate(units)}

    ll_history: list[float] = []

    def em_pass() -> tuple[list[float], float]:
        expected = [0.0] * len(units)
        ll = 0.0
        for piece, w in zip(pieces, weights):
            n = len(piece)
            by_end, by_start = _piece_arcs(piece, unit_index, cfg.max_token_length)
            alpha = [NEG_INF] * (n + 1)
            alpha[0] = 0.0
            for j in range(1, n + 1):
                acc = NEG_INF
                for i, uid in by_end[j]:
                    if alpha[i] != NEG_INF:
                        acc = _log_add(acc, alpha[i] + log_probs[uid])
                alpha[j] = acc
            z = alpha[n]
            if z == NEG_INF:
                raise TrainingError(f"lattice disconnected for piece {piece!r}")
            beta = [NEG_INF] * (n + 1)
            beta[n] = 0.0
            for i in range(n - 1, -1, -1):
                acc = NEG_INF
                for j, uid in by_start[i]:
                    if beta[j] != NEG_INF:
                        acc = _log_add(acc, log_probs[uid] + beta[j])
                beta[i] = acc
            for i in range(n):
                if alpha[i] == NEG_INF:
                    continue
                for j, uid in by_start[i]:
                    if beta[j] == NEG_INF:
                        continue
                    expected[uid] += w * math.exp(alpha[i] + log_probs[uid] + beta[j] - z)
            ll += w * z
        return expected, ll

    max_rounds = 200
    for _ in range(max_rounds):
        expected = None
        for _ in range(cfg.unigram_em_iterations):
            expected, ll = em_pass()
            ll_history.append(ll)
            total = sum(expected)
            ratios = [e / total for e in expected]
            log_probs = [math.log(r) if r > 0 else -100.0 for r in ratios]
        if len(units) <= target_units:
            break
        # prune multi-char units with the smallest likelihood impact
        removable = [i for i, u in enumerate(units) if len(u) > 1]
        if not removable:
            break
        losses = []
        for uid in removable:
            alt = _viterbi_best(units[uid], unit_index, log_probs, cfg.max_token_length, exclude=uid)
            freq = expected[uid] if expected is not None else 0.0
            losses.append((freq * (log_probs[uid] - alt), units[uid], uid))
        losses.sort(key=lambda t: (t[0], t[1]))
        n_prune = max(1, int(cfg.unigram_prune_fraction * len(removable)))
        n_prune = min(n_prune, len(units) - target_units, len(removable))
        drop = {uid for _, _, uid in losses[:n_prune]}
        units = [u for i, u in enumerate(units) if i not in drop]
        log_probs = [lp for i, lp in enumerate(log_probs) if i not in drop]
        unit_index = {u: i for i, u in enumerate(units)}

    # renormalize with a floor probability reserved for <unk>, keeping sum == 1
    # (scores are floored so exp() cannot underflow to exactly zero)
    probs = [math.exp(max(lp, -80.0)) for lp in log_probs]
    total = sum(probs)
    probs = [p / total for p in probs]
    unk_raw = 0.5 * min(probs)
    denom = 1.0 + unk_raw
    probs = [p / denom for p in probs]
    unk_p = unk_raw / denom

    # frequent units get the lowest ids (packed token streams stay compact)
    order = sorted(range(len(units)), key=lambda i: (-probs[i], units[i]))
    tokens: list[str | bytes] = list(cfg.specials) + [units[i] for i in order]
    scores = {n_specials + rank: math.log(probs[i]) for rank, i in enumerate(order)}
    scores[UNK_ID] = math.log(unk_p)
    return TokenizerModel(
        family="unigram",
        vocab=Vocabulary(tokens, specials=cfg.specials),
        scores=scores,
        preprocessing=_preprocessing(cfg),
        byte_level=False,
        trainer={
            "seed": cfg.seed,
            "max_token_length": cfg.max_token_length,
            "seed_multiplier": cfg.unigram_seed_multiplier,
            "prune_fraction": cfg.unigram_prune_fraction,
            "em_iterations": cfg.unigram_em_iterations,
            "em_log_likelihoods": ll_history,
        },
    )
