"""Shared tokenizer runtime: vocabulary, encode/decode, model files, rank lists.

All families share one preprocessing convention: text is split on runs of
Unicode whitespace, and every non-leading piece keeps its whitespace run as a
leading marker (GPT style), so concatenating pieces restores the input exactly.
Byte-level BPE therefore round-trips losslessly; character-level families are
exact on text that produces no <unk>. WordLevel drops the marker and is lossy
by design (whole whitespace-delimited words).

Unicode normalization (NFKC) is deliberately *not* applied inside encode():
it is a corpus-pipeline stage (see normalize/prepare_text), recorded in the
model's preprocessing config, because NFKC is not injective and encode/decode
must stay a lossless pair for byte-level models.
"""

from __future__ import annotations

import base64
import heapq
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

FORMAT_VERSION = 1

SPECIAL_TOKENS: tuple[str, ...] = ("<pad>", "<unk>", "<bos>", "<eos>")
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3

FAMILIES = ("bpe", "unigram", "wordpiece", "wordlevel", "external-ranklist")

WORDPIECE_CONTINUATION = "##"

_NONSPACE_RE = re.compile(r"\S+")


class TokenizerError(ValueError):
    pass


def normalize(text: str) -> str:
    """NFKC-normalize text (the shared preprocessing step for trained models)."""
    return unicodedata.normalize("NFKC", text)


def pretokenize(text: str) -> list[str]:
    """Split text into whitespace-marked pieces whose concatenation is the input.

    Each piece is a run of non-whitespace characters prefixed by the whitespace
    run that precedes it ("a b" -> ["a", " b"]). Trailing whitespace becomes a
    final whitespace-only piece.
    """
    pieces: list[str] = []
    prev_end = 0
    for m in _NONSPACE_RE.finditer(text):
        pieces.append(text[prev_end : m.end()])
        prev_end = m.end()
    if prev_end < len(text):
        pieces.append(text[prev_end:])
    return pieces


class Vocabulary:
    """Dense id -> token table; token ids are list positions.

    Tokens are ``str`` for character-level families and special tokens, and
    ``bytes`` for byte-level tokens. Special tokens occupy the lowest ids.
    """

    def __init__(self, tokens: Sequence[str | bytes], specials: Sequence[str] = ()):
        self._tokens: list[str | bytes] = list(tokens)
        self.specials: tuple[str, ...] = tuple(specials)
        index: dict[str | bytes, int] = {}
        for i, tok in enumerate(self._tokens):
            if tok in index:
                raise TokenizerError(f"duplicate vocabulary entry at ids {index[tok]} and {i}: {tok!r}")
            index[tok] = i
        self._index = index
        for i, sp in enumerate(self.specials):
            if i >= len(self._tokens) or self._tokens[i] != sp:
                raise TokenizerError(f"special token {sp!r} must sit at id {i}")

    @property
    def size(self) -> int:
        return len(self._tokens)

    def __len__(self) -> int:
        return len(self._tokens)

    def entries(self) -> Iterator[tuple[str | bytes, int]]:
        return ((tok, i) for i, tok in enumerate(self._tokens))

    def token(self, token_id: int) -> str | bytes:
        if not 0 <= token_id < len(self._tokens):
            raise TokenizerError(f"token id {token_id} out of range [0, {len(self._tokens)})")
        return self._tokens[token_id]

    def id_of(self, token: str | bytes) -> int | None:
        return self._index.get(token)

    def __contains__(self, token: str | bytes) -> bool:
        return token in self._index


@dataclass(frozen=True)
class Preprocessing:
    nfkc: bool = True
    pretokenizer: str = "whitespace"  # "whitespace" | "none"


@dataclass
class TokenStream:
    """Token ids produced from one text, with source size counters.

    ``piece_starts`` optionally marks positions where a pre-token begins;
    operations that must not cross pre-token boundaries (pair counting,
    merge application) honor it when present.
    """

    ids: np.ndarray
    source_chars: int
    source_bytes: int
    piece_starts: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.piece_starts is not None:
            self.piece_starts = np.asarray(self.piece_starts, dtype=bool)
            if self.piece_starts.shape != self.ids.shape:
                raise TokenizerError("piece_starts must align with ids")

    @property
    def n(self) -> int:
        return int(self.ids.size)


@dataclass
class TokenizerModel:
    """A trained tokenizer: family, vocabulary, merge/score tables, config."""

    family: str
    vocab: Vocabulary
    merges: list[tuple[int, int]] = field(default_factory=list)
    scores: dict[int, float] = field(default_factory=dict)
    preprocessing: Preprocessing = field(default_factory=Preprocessing)
    byte_level: bool = False
    provenance: str = ""
    trainer: dict | None = None
    rank_gaps: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise TokenizerError(f"unknown tokenizer family: {self.family!r}")
        k = self.vocab.size
        for m, (left, right) in enumerate(self.merges):
            if not (0 <= left < k and 0 <= right < k):
                raise TokenizerError(f"merge {m} references out-of-range ids ({left}, {right})")
        for tid, score in self.scores.items():
            if not (0 <= tid < k):
                raise TokenizerError(f"score for out-of-range id {tid}")
            if not np.isfinite(score):
                raise TokenizerError(f"non-finite score for id {tid}")

    # ---- derived tables, built lazily and cached on the model ----

    def _merge_table(self) -> dict[tuple[int, int], tuple[int, int]]:
        """(left, right) -> (rank, merged id), from the ordered merge list."""
        tab = self._cache.get("merge_table")
        if tab is None:
            tab = {}
            for rank, (left, right) in enumerate(self.merges):
                merged = _concat_tokens(self.vocab.token(left), self.vocab.token(right))
                new_id = self.vocab.id_of(merged)
                if new_id is None:
                    raise TokenizerError(f"merge {rank} target {merged!r} missing from vocabulary")
                tab[(left, right)] = (rank, new_id)
            self._cache["merge_table"] = tab
        return tab

    def _byte_ids(self) -> np.ndarray:
        arr = self._cache.get("byte_ids")
        if arr is None:
            arr = np.full(256, -1, dtype=np.int64)
            for tok, tid in self.vocab.entries():
                if isinstance(tok, bytes) and len(tok) == 1:
                    arr[tok[0]] = tid
            self._cache["byte_ids"] = arr
        return arr

    def _str_token_index(self) -> dict[str, int]:
        idx = self._cache.get("str_index")
        if idx is None:
            idx = {tok: tid for tok, tid in self.vocab.entries() if isinstance(tok, str)}
            self._cache["str_index"] = idx
        return idx

    def _max_token_chars(self) -> int:
        val = self._cache.get("max_chars")
        if val is None:
            lengths = [len(t) for t, _ in self.vocab.entries() if isinstance(t, str)]
            val = max(lengths) if lengths else 1
            self._cache["max_chars"] = val
        return val


def _concat_tokens(left: str | bytes, right: str | bytes) -> str | bytes:
    if isinstance(left, bytes) and isinstance(right, bytes):
        return left + right
    if isinstance(left, str) and isinstance(right, str):
        if right.startswith(WORDPIECE_CONTINUATION):
            return left + right[len(WORDPIECE_CONTINUATION) :]
        return left + right
    raise TokenizerError(f"cannot merge tokens of mixed kind: {left!r} + {right!r}")


def prepare_text(model: TokenizerModel, text: str) -> str:
    """Apply the model's recorded corpus preprocessing (NFKC when configured)."""
    return normalize(text) if model.preprocessing.nfkc else text


# ---------------------------------------------------------------------------
# Encoding


def encode(model: TokenizerModel, text: str) -> TokenStream:
    """Tokenize text deterministically according to the model family."""
    source_chars = len(text)
    source_bytes = len(text.encode("utf-8"))
    if model.family == "external-ranklist":
        ids = _encode_ranklist(model, text)
    elif model.family == "bpe":
        ids = _encode_piecewise(model, text, _encode_piece_bpe)
    elif model.family == "unigram":
        ids = _encode_piecewise(model, text, _encode_piece_unigram)
    elif model.family == "wordpiece":
        ids = _encode_piecewise(model, text, _encode_piece_wordpiece)
    elif model.family == "wordlevel":
        ids = _encode_piecewise(model, text, _encode_piece_wordlevel)
    else:  # pragma: no cover - guarded by __post_init__
        raise TokenizerError(f"unknown family {model.family!r}")
    return TokenStream(
        ids=np.asarray(ids, dtype=np.int64),
        source_chars=source_chars,
        source_bytes=source_bytes,
    )


def _encode_piecewise(model: TokenizerModel, text: str, piece_fn) -> list[int]:
    out: list[int] = []
    cache: dict[str, list[int]] = {}
    for piece in pretokenize(text):
        ids = cache.get(piece)
        if ids is None:
            ids = piece_fn(model, piece)
            cache[piece] = ids
        out.extend(ids)
    return out


def _encode_piece_bpe(model: TokenizerModel, piece: str) -> list[int]:
    byte_ids = model._byte_ids()
    data = piece.encode("utf-8")
    ids = [int(byte_ids[b]) for b in data]
    if any(i < 0 for i in ids):
        missing = [data[k] for k, i in enumerate(ids) if i < 0]
        raise TokenizerError(f"byte-level model lacks single-byte tokens for {missing[:4]}")
    table = model._merge_table()
    while len(ids) >= 2:
        best_rank = None
        best = None
        for a, b in zip(ids, ids[1:]):
            hit = table.get((a, b))
            if hit is not None and (best_rank is None or hit[0] < best_rank):
                best_rank = hit[0]
                best = (a, b, hit[1])
        if best is None:
            break
        ids = _replace_pair(ids, (best[0], best[1]), best[2])
    return ids


def _replace_pair(ids: list[int], pair: tuple[int, int], new_id: int) -> list[int]:
    """Replace non-overlapping occurrences of pair, scanning left to right."""
    left, right = pair
    out: list[int] = []
    i = 0
    n = len(ids)
    while i < n:
        if i + 1 < n and ids[i] == left and ids[i + 1] == right:
            out.append(new_id)
            i += 2
        else:
            out.append(ids[i])
            i += 1
    return out


def _encode_piece_unigram(model: TokenizerModel, piece: str) -> list[int]:
    """Max-score segmentation (Viterbi); ties prefer fewer tokens."""
    table = model._cache.get("unigram_table")
    if table is None:
        index = model._str_token_index()
        table = {
            tok: (tid, model.scores[tid])
            for tok, tid in index.items()
            if tid in model.scores and tok not in model.vocab.specials
        }
        model._cache["unigram_table"] = table
    unk_score = model.scores.get(UNK_ID, -1e4)
    max_len = model._max_token_chars()
    n = len(piece)
    neg_inf = float("-inf")
    best_score = [neg_inf] * (n + 1)
    best_ntok = [0] * (n + 1)
    back: list[tuple[int, int] | None] = [None] * (n + 1)  # (start, token id)
    best_score[0] = 0.0
    for j in range(1, n + 1):
        lo = max(0, j - max_len)
        for i in range(lo, j):
            if best_score[i] == neg_inf:
                continue
            hit = table.get(piece[i:j])
            if hit is None:
                continue
            cand = best_score[i] + hit[1]
            ntok = best_ntok[i] + 1
            if cand > best_score[j] or (cand == best_score[j] and ntok < best_ntok[j]):
                best_score[j] = cand
                best_ntok[j] = ntok
                back[j] = (i, hit[0])
        # unknown-character fallback keeps the lattice connected
        i = j - 1
        if best_score[i] != neg_inf:
            cand = best_score[i] + unk_score
            ntok = best_ntok[i] + 1
            if cand > best_score[j] or (cand == best_score[j] and ntok < best_ntok[j]):
                best_score[j] = cand
                best_ntok[j] = ntok
                back[j] = (i, UNK_ID)
    ids: list[int] = []
    j = n
    while j > 0:
        i, tid = back[j]  # type: ignore[misc]
        ids.append(tid)
        j = i
    ids.reverse()
    return ids


def _encode_piece_wordpiece(model: TokenizerModel, piece: str) -> list[int]:
    """Greedy longest-match-first; any unmatched position makes the piece <unk>."""
    index = model._str_token_index()
    max_len = model._max_token_chars()
    n = len(piece)
    ids: list[int] = []
    pos = 0
    while pos < n:
        prefix = WORDPIECE_CONTINUATION if pos > 0 else ""
        found = None
        for length in range(min(max_len, n - pos), 0, -1):
            cand = prefix + piece[pos : pos + length]
            tid = index.get(cand)
            if tid is not None and cand not in model.vocab.specials:
                found = (tid, length)
                break
        if found is None:
            return [UNK_ID]
        ids.append(found[0])
        pos += found[1]
    return ids


def _encode_piece_wordlevel(model: TokenizerModel, piece: str) -> list[int]:
    word = piece.strip()
    if not word:
        return []
    tid = model._str_token_index().get(word)
    if tid is None or word in model.vocab.specials:
        return [UNK_ID]
    return [tid]


def _encode_ranklist(model: TokenizerModel, text: str) -> list[int]:
    """Greedy rank-minimizing byte-pair merging over the whole byte stream."""
    data = text.encode("utf-8")
    if not data:
        return []
    rank_index = model._cache.get("rank_index")
    if rank_index is None:
        # dense ids were assigned in rank order, so id order == merge priority
        rank_index = {tok: tid for tok, tid in model.vocab.entries() if isinstance(tok, bytes)}
        model._cache["rank_index"] = rank_index
    byte_ids = model._byte_ids()
    for b in set(data):
        if byte_ids[b] < 0:
            raise TokenizerError(f"rank list lacks a single-byte token for byte {b:#04x}")
    return _greedy_rank_merge(data, rank_index)


def _greedy_rank_merge(data: bytes, rank_of: dict[bytes, int]) -> list[int]:
    """Repeatedly merge the adjacent token pair whose joined bytes have the
    lowest rank (leftmost occurrence first), until no join is in the table.

    Linked-list over byte positions with a lazy heap; O(n log n).
    """
    n = len(data)
    nxt = list(range(1, n + 1))
    prv = list(range(-1, n - 1))
    end = list(range(1, n + 1))  # token at position i spans data[i:end[i]]
    alive = [True] * n
    heap: list[tuple[int, int]] = []
    for i in range(n - 1):
        r = rank_of.get(data[i : i + 2])
        if r is not None:
            heap.append((r, i))
    heapq.heapify(heap)
    while heap:
        r, i = heapq.heappop(heap)
        if not alive[i]:
            continue
        j = nxt[i]
        if j >= n:
            continue
        cur = rank_of.get(data[i : end[j]])
        if cur != r:
            continue  # stale entry
        # merge token j into token i
        end[i] = end[j]
        alive[j] = False
        nj = nxt[j]
        nxt[i] = nj
        if nj < n:
            prv[nj] = i
        p = prv[i]
        if p >= 0:
            rr = rank_of.get(data[p : end[i]])
            if rr is not None:
                heapq.heappush(heap, (rr, p))
        if nj < n:
            rr = rank_of.get(data[i : end[nj]])
            if rr is not None:
                heapq.heappush(heap, (rr, i))
    out: list[int] = []
    i = 0
    while i < n:
        out.append(rank_of[data[i : end[i]]])
        i = nxt[i]
    return out


# ---------------------------------------------------------------------------
# Decoding


def decode(model: TokenizerModel, stream: TokenStream | Sequence[int]) -> str:
    """Invert encode(). Exact for byte-level models; exact up to <unk> otherwise."""
    ids = stream.ids if isinstance(stream, TokenStream) else np.asarray(stream, dtype=np.int64)
    k = model.vocab.size
    if ids.size and (ids.min() < 0 or ids.max() >= k):
        bad = int(ids[(ids < 0) | (ids >= k)][0])
        raise TokenizerError(f"token id {bad} out of range [0, {k})")
    if model.byte_level:
        chunks = []
        for tid in ids.tolist():
            tok = model.vocab.token(int(tid))
            chunks.append(tok if isinstance(tok, bytes) else tok.encode("utf-8"))
        return b"".join(chunks).decode("utf-8", errors="replace")
    tokens = [model.vocab.token(int(tid)) for tid in ids.tolist()]
    if model.family == "wordlevel":
        return " ".join(tokens)  # whole words; whitespace marker discarded (lossy)
    if model.family == "wordpiece":
        return "".join(
            t[len(WORDPIECE_CONTINUATION) :] if t.startswith(WORDPIECE_CONTINUATION) else t
            for t in tokens
        )
    return "".join(tokens)


# ---------------------------------------------------------------------------
# Model files


def _token_to_json(tok: str | bytes) -> dict:
    if isinstance(tok, bytes):
        return {"b64": base64.b64encode(tok).decode("ascii")}
    return {"text": tok}


def _token_from_json(obj: dict) -> str | bytes:
    if "b64" in obj:
        return base64.b64decode(obj["b64"], validate=True)
    if "text" in obj:
        return obj["text"]
    raise TokenizerError(f"bad vocab entry: {obj!r}")


def model_to_json_dict(model: TokenizerModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "byte_level": model.byte_level,
        "preprocessing": {
            "nfkc": model.preprocessing.nfkc,
            "pretokenizer": model.preprocessing.pretokenizer,
        },
        "specials": list(model.vocab.specials),
        "vocab": [[_token_to_json(tok), tid] for tok, tid in model.vocab.entries()],
        "merges": [[left, right] for left, right in model.merges],
        "scores": [[tid, model.scores[tid]] for tid in sorted(model.scores)],
        "provenance": model.provenance,
        "trainer": model.trainer,
        "rank_gaps": model.rank_gaps,
    }


def save_model(model: TokenizerModel, path: str | Path) -> None:
    payload = json.dumps(model_to_json_dict(model), ensure_ascii=False, separators=(",", ":"))
    Path(path).write_text(payload + "\n", encoding="utf-8")


def model_from_json_dict(obj: dict) -> TokenizerModel:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise TokenizerError(f"unsupported model format_version: {version!r}")
    family = obj.get("family")
    if family not in FAMILIES:
        raise TokenizerError(f"unknown tokenizer family: {family!r}")
    entries = obj.get("vocab", [])
    tokens: list[str | bytes] = [None] * len(entries)  # type: ignore[list-item]
    for entry, tid in entries:
        if not (isinstance(tid, int) and 0 <= tid < len(entries)):
            raise TokenizerError(f"non-dense vocab id: {tid!r}")
        if tokens[tid] is not None:
            raise TokenizerError(f"duplicate vocab id: {tid}")
        tokens[tid] = _token_from_json(entry)
    if any(t is None for t in tokens):
        raise TokenizerError("vocab ids are not dense")
    vocab = Vocabulary(tokens, specials=tuple(obj.get("specials", ())))
    return TokenizerModel(
        family=family,
        vocab=vocab,
        merges=[(int(l), int(r)) for l, r in obj.get("merges", [])],
        scores={int(tid): float(s) for tid, s in obj.get("scores", [])},
        preprocessing=Preprocessing(
            nfkc=bool(obj["preprocessing"]["nfkc"]),
            pretokenizer=obj["preprocessing"]["pretokenizer"],
        ),
        byte_level=bool(obj.get("byte_level", False)),
        provenance=obj.get("provenance", ""),
        trainer=obj.get("trainer"),
        rank_gaps=int(obj.get("rank_gaps", 0)),
    )


def load_model(path: str | Path) -> TokenizerModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TokenizerError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_json_dict(obj)


# ---------------------------------------------------------------------------
# Rank-list models (tiktoken-style "base64 SPACE rank" lines)


def load_rank_list_model(path: str | Path) -> TokenizerModel:
    """Load a byte-level BPE rank list into an external-ranklist model.

    Each line holds base64 token bytes, a space, and an integer rank. Ranks
    are remapped to dense token ids preserving rank order; gaps are tolerated
    and counted in ``rank_gaps``.
    """
    path = Path(path)
    ranked: list[tuple[int, bytes]] = []
    seen_ranks: set[int] = set()
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(b" ")
            if len(parts) != 2:
                raise TokenizerError(f"{path}:{lineno}: expected 'base64 rank', got {raw!r}")
            try:
                tok = base64.b64decode(parts[0], validate=True)
            except Exception as exc:
                raise TokenizerError(f"{path}:{lineno}: bad base64 token: {exc}") from exc
            try:
                rank = int(parts[1])
            except ValueError as exc:
                raise TokenizerError(f"{path}:{lineno}: bad rank {parts[1]!r}") from exc
            if rank < 0:
                raise TokenizerError(f"{path}:{lineno}: negative rank {rank}")
            if rank in seen_ranks:
                raise TokenizerError(f"{path}:{lineno}: duplicate rank {rank}")
            seen_ranks.add(rank)
            ranked.append((rank, tok))
    if not ranked:
        raise TokenizerError(f"rank list {path} is empty")
    ranked.sort(key=lambda rt: rt[0])
    gaps = ranked[-1][0] + 1 - len(ranked)
    tokens = [tok for _, tok in ranked]
    vocab = Vocabulary(tokens, specials=())
    return TokenizerModel(
        family="external-ranklist",
        vocab=vocab,
        preprocessing=Preprocessing(nfkc=False, pretokenizer="none"),
        byte_level=True,
        rank_gaps=gaps,
    )
