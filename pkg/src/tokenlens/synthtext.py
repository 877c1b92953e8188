"""Deterministic synthetic corpora for demos and self-contained evaluation.

Two generators, both seeded and reproducible:

* ``english_like``: simple web-prose stand-in with a bounded Zipf-ranked core
  vocabulary (function-word head + syllable-built content words sharing a
  small morpheme pool), a one-off novel-word tail (names/typos stand-in),
  topic segments for mid-range coherence, sentences, paragraphs and sparse
  numerals.
* ``code_like``: source-code stand-in assembled from indented statement
  templates over snake_case identifiers, literals and operators.

These exist because the toolkit takes local text as input; no corpus
downloads happen anywhere.
"""

from __future__ import annotations

import numpy as np

_FUNCTION_WORDS = (
    "the of and to in a is that it was for on are as with his they at be this "
    "from i have or by one had not but what all were when we there can an your "
    "which their said if do will each about how up out them then she many some "
    "so these would other into has more her two like him see time could no make "
    "than first been its who now people my made over did down only way find use "
    "may water long little very after words called just where most know"
).split()

_ONSETS = [
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t",
    "v", "w", "z", "st", "tr", "ch", "sh", "pl", "br", "gr", "sp", "cl", "fr",
    "dr", "th", "wh", "qu",
]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "ou", "io", "ee", "oa"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "d", "m", "p", "ck", "st", "nd", "ng", "rt", "ss", "ll"]
_SUFFIXES = ["", "", "", "", "", "", "s", "ed", "ing", "ly", "er", "est", "tion", "ness", "ment", "al", "ous", "ive"]


def _zipf_probs(n: int, exponent: float, shift: float = 2.7) -> np.ndarray:
    p = 1.0 / (np.arange(n) + shift) ** exponent
    return p / p.sum()


def _build_syllable_pool(rng: np.random.Generator, n_syllables: int = 160) -> list[str]:
    """A small shared pool of syllables so words share substrings heavily,
    the way real vocabularies share morphemes."""
    pool: list[str] = []
    seen: set[str] = set()
    while len(pool) < n_syllables:
        o = _ONSETS[rng.integers(0, len(_ONSETS))]
        v = _VOWELS[rng.integers(0, len(_VOWELS))]
        c = _CODAS[rng.integers(0, len(_CODAS))]
        syll = o + v + (c if rng.random() < 0.5 else "")
        if syll not in seen:
            seen.add(syll)
            pool.append(syll)
    return pool


def _compose_words(
    rng: np.random.Generator,
    syllables: list[str],
    syll_cdf: np.ndarray,
    count: int,
    seen: set[str],
    min_syllables: int,
    max_syllables: int,
) -> list[str]:
    words: list[str] = []
    while len(words) < count:
        batch = (count - len(words)) * 2 + 64
        n_syll = rng.integers(min_syllables, max_syllables + 1, size=batch)
        draws = np.searchsorted(syll_cdf, rng.random((batch, max_syllables)))
        suf = rng.integers(0, len(_SUFFIXES), size=batch)
        for b in range(batch):
            w = "".join(syllables[draws[b, s]] for s in range(n_syll[b])) + _SUFFIXES[suf[b]]
            if 2 <= len(w) <= 16 and w not in seen:
                seen.add(w)
                words.append(w)
                if len(words) >= count:
                    break
    return words


def english_like(
    n_chars: int,
    seed: int = 0,
    vocab_words: int = 1000,
    zipf_exponent: float = 1.05,
    n_topics: int = 40,
    topic_weight: float = 0.4,
    novel_rate: float = 0.015,
    number_rate: float = 0.003,
    rare_tier_words: int = 10_000,
    rare_tier_mass: float = 0.035,
) -> str:
    """Generate ``n_chars`` characters of simple English-like prose.

    The repeated vocabulary has a Zipf core of ``vocab_words`` types plus a
    flat rare tier (``rare_tier_words`` types sharing ``rare_tier_mass`` of
    the distribution) whose types only start repeating at larger corpus
    scales; a ``novel_rate`` fraction of slots draw one-off novel words,
    standing in for the hapax tail (names, typos) of real web text.
    """
    if n_chars <= 0:
        raise ValueError("n_chars must be positive")
    rng = np.random.default_rng(seed)
    syllables = _build_syllable_pool(rng)
    syll_cdf = np.cumsum(_zipf_probs(len(syllables), 0.85))
    seen: set[str] = set(_FUNCTION_WORDS)
    core = list(_FUNCTION_WORDS) + _compose_words(
        rng, syllables, syll_cdf, vocab_words - len(_FUNCTION_WORDS), seen, 1, 3
    )
    core += _compose_words(rng, syllables, syll_cdf, rare_tier_words, seen, 2, 2)
    n = len(core)
    base = np.concatenate(
        [
            (1.0 - rare_tier_mass) * _zipf_probs(vocab_words, zipf_exponent),
            np.full(rare_tier_words, rare_tier_mass / rare_tier_words),
        ]
    )
    base /= base.sum()

    # topic-specific reweighting toward a random core content-word subset
    # (the rare tier stays flat so its types keep their corpus-scale counts)
    n_head = len(_FUNCTION_WORDS)
    topic_cdfs = np.empty((n_topics, n), dtype=np.float64)
    for t in range(n_topics):
        boost = np.ones(n)
        members = rng.choice(
            np.arange(n_head, vocab_words), size=(vocab_words - n_head) // n_topics, replace=False
        )
        boost[members] = 40.0
        p = base * boost
        p /= p.sum()
        p = (1 - topic_weight) * base + topic_weight * p
        topic_cdfs[t] = np.cumsum(p)

    target_words = int(n_chars / 5.0) + 64
    idx_blocks: list[np.ndarray] = []
    produced = 0
    while produced < target_words:
        seg_len = int(rng.geometric(1.0 / 300.0))
        seg_len = max(20, min(seg_len, 2000, target_words - produced + 20))
        topic = int(rng.integers(0, n_topics))
        u = rng.random(seg_len)
        idx_blocks.append(np.searchsorted(topic_cdfs[topic], u))
        produced += seg_len
    indices = np.concatenate(idx_blocks)[:target_words]

    # one-off novel words: mostly 3-4 syllables so repeats stay negligible
    novel_mask = rng.random(indices.size) < novel_rate
    n_novel = int(novel_mask.sum())
    novel_words = _compose_words(rng, syllables, syll_cdf, n_novel + 16, seen, 3, 4)

    number_mask = (~novel_mask) & (rng.random(indices.size) < number_rate)
    numbers = rng.integers(1, 1000, size=max(int(number_mask.sum()), 1))

    sentence_lengths = rng.integers(10, 29, size=indices.size // 10 + 2)
    comma_mask = rng.random(indices.size) < 0.03
    para_every = rng.integers(4, 10, size=indices.size // 16 + 2)

    out: list[str] = []
    chars = 0
    w_i = 0
    novel_i = 0
    num_i = 0
    s_i = 0
    sent_in_para = 0
    para_i = 0
    total = indices.size
    while chars < n_chars and w_i < total:
        slen = int(sentence_lengths[s_i % sentence_lengths.size])
        s_i += 1
        sent: list[str] = []
        for j in range(slen):
            if w_i >= total:
                break
            if novel_mask[w_i]:
                tok = novel_words[novel_i % len(novel_words)]
                novel_i += 1
            elif number_mask[w_i]:
                tok = str(numbers[num_i % numbers.size])
                num_i += 1
            else:
                tok = core[indices[w_i]]
            if j == 0:
                tok = tok[0].upper() + tok[1:]
            elif comma_mask[w_i] and j < slen - 1:
                tok += ","
            sent.append(tok)
            w_i += 1
        sentence = " ".join(sent) + "."
        sent_in_para += 1
        if sent_in_para >= int(para_every[para_i % para_every.size]):
            sentence += "\n"
            sent_in_para = 0
            para_i += 1
        else:
            sentence += " "
        out.append(sentence)
        chars += len(sentence)
    return "".join(out)[:n_chars]


_KEYWORDS = ["def", "return", "if", "else", "elif", "for", "while", "import", "from", "class", "in", "not", "and", "or", "None", "True", "False", "self", "try", "except", "raise", "with", "as", "pass", "break", "continue", "lambda", "yield", "assert", "print", "len", "range", "int", "str", "list", "dict"]

_STEMS = [
    "data", "value", "count", "index", "item", "node", "line", "file", "path",
    "name", "key", "result", "total", "size", "list", "map", "row", "col",
    "text", "word", "token", "char", "buf", "tmp", "out", "src", "dst", "ctx",
    "arg", "opt", "cfg", "err", "msg", "req", "res", "obj", "ptr", "len",
    "max", "min", "sum", "avg", "idx", "pos", "off", "num", "val", "ref",
    "cache", "queue", "stack", "tree", "graph", "batch", "chunk", "block",
    "state", "flag", "mode", "type", "kind", "level", "depth", "width",
]

_VERBS = ["get", "set", "load", "save", "read", "write", "parse", "build", "make", "init", "update", "check", "find", "add", "remove", "pop", "push", "open", "close", "run", "compute", "merge", "split", "sort", "filter", "apply", "reset", "clear", "copy", "next"]


def _build_identifiers(rng: np.random.Generator, n_ids: int) -> list[str]:
    idents: list[str] = list(_STEMS)
    seen = set(idents)
    while len(idents) < n_ids:
        kind = rng.integers(0, 3)
        if kind == 0:
            w = _VERBS[rng.integers(0, len(_VERBS))] + "_" + _STEMS[rng.integers(0, len(_STEMS))]
        elif kind == 1:
            w = _STEMS[rng.integers(0, len(_STEMS))] + "_" + _STEMS[rng.integers(0, len(_STEMS))]
        else:
            w = _STEMS[rng.integers(0, len(_STEMS))] + str(rng.integers(0, 10))
        if w not in seen:
            seen.add(w)
            idents.append(w)
    return idents


def code_like(n_chars: int, seed: int = 0, vocab_identifiers: int = 700) -> str:
    """Generate ``n_chars`` characters of Python-like source, deterministically."""
    if n_chars <= 0:
        raise ValueError("n_chars must be positive")
    rng = np.random.default_rng(seed + 101)
    idents = _build_identifiers(rng, vocab_identifiers)
    probs = _zipf_probs(len(idents), 1.05)
    cdf = np.cumsum(probs)

    def pick() -> str:
        return idents[int(np.searchsorted(cdf, rng.random()))]

    ops = ["+", "-", "*", "//", "%", "==", "!=", "<", ">", "<=", ">="]
    out: list[str] = []
    chars = 0
    indent = 0
    lines_in_block = 0
    while chars < n_chars:
        r = int(rng.integers(0, 100))
        pad = "    " * indent
        if r < 8 and indent == 0:
            a, b = pick(), pick()
            line = f"def {pick()}_{pick()}({a}, {b}):"
            indent = 1
            lines_in_block = 0
        elif r < 12 and indent == 0:
            line = f"class {pick().title().replace('_', '')}:"
            indent = 1
            lines_in_block = 0
        elif r < 17 and indent == 0:
            line = f"import {pick()}"
        elif r < 27:
            line = f"{pad}for {pick()} in range({rng.integers(1, 256)}):"
            indent = min(indent + 1, 3)
            lines_in_block = 0
        elif r < 37:
            line = f"{pad}if {pick()} {ops[rng.integers(0, len(ops))]} {rng.integers(0, 100)}:"
            indent = min(indent + 1, 3)
            lines_in_block = 0
        elif r < 55:
            line = f"{pad}{pick()} = {pick()}({pick()}, {rng.integers(0, 64)})"
        elif r < 70:
            line = f"{pad}{pick()} = {pick()} {ops[rng.integers(0, len(ops))]} {pick()}"
        elif r < 78:
            line = f"{pad}{pick()}.append({pick()}[{rng.integers(0, 32)}])"
        elif r < 84:
            line = f"{pad}return {pick()} {ops[rng.integers(0, 5)]} {pick()}"
            indent = max(indent - 1, 0)
        elif r < 90:
            line = f"{pad}{pick()} = [{rng.integers(0, 9)}, {rng.integers(0, 9)}, {rng.integers(0, 9)}]"
        elif r < 96:
            line = f"{pad}{pick()} = \"{pick()}\""
        else:
            line = f"{pad}# {pick()} {pick()} {pick()}"
        out.append(line + "\n")
        chars += len(line) + 1
        lines_in_block += 1
        if indent > 0 and lines_in_block > int(rng.integers(2, 9)):
            indent -= 1
            lines_in_block = 2
    return "".join(out)[:n_chars]
