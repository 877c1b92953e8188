import base64
import json
import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenlens.tokenizer import (
    SPECIAL_TOKENS,
    UNK_ID,
    Preprocessing,
    TokenStream,
    TokenizerError,
    TokenizerModel,
    Vocabulary,
    decode,
    encode,
    load_model,
    load_rank_list_model,
    model_to_json_dict,
    normalize,
    pretokenize,
    save_model,
)


# ---------------------------------------------------------------------------
# normalize / pretokenize


def test_nfkc_ligature():
    # oracle: the unicodedata reference implementation
    assert normalize("ﬁ") == "fi"
    assert normalize("ﬁ") == unicodedata.normalize("NFKC", "ﬁ")


def test_nfkc_ascii_fixed_point():
    assert normalize("abc") == "abc"


def test_nfkc_circled_digit():
    assert normalize("①") == "1"


def test_pretokenize_single_split():
    assert pretokenize("a b") == ["a", " b"]


def test_pretokenize_empty():
    assert pretokenize("") == []


@given(st.text(max_size=60))
def test_pretokenize_roundtrip(text):
    assert "".join(pretokenize(text)) == text


def test_pretokenize_double_space_roundtrip():
    pieces = pretokenize("x  y")
    assert "".join(pieces) == "x  y"
    assert pieces == ["x", "  y"]


# ---------------------------------------------------------------------------
# vocabulary and model validation


def test_vocabulary_rejects_duplicates():
    with pytest.raises(TokenizerError, match="duplicate"):
        Vocabulary(["a", "b", "a"])


def test_vocabulary_specials_must_lead():
    with pytest.raises(TokenizerError, match="special"):
        Vocabulary(["a", "<pad>"], specials=("<pad>",))


def test_model_rejects_unknown_family():
    with pytest.raises(TokenizerError, match="family"):
        TokenizerModel(family="nope", vocab=Vocabulary(["a"]))


def _byte_model(merge_pairs=()):
    tokens = list(SPECIAL_TOKENS) + [bytes([b]) for b in range(256)]
    merges = []
    for left, right in merge_pairs:
        li = tokens.index(left)
        ri = tokens.index(right)
        tokens.append(left + right)
        merges.append((li, ri))
    return TokenizerModel(
        family="bpe",
        vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS),
        merges=merges,
        byte_level=True,
        preprocessing=Preprocessing(nfkc=False),
    )


def test_bpe_encode_hand_applied_merges():
    model = _byte_model([(b"a", b"b")])
    stream = encode(model, "abab")
    merged_id = model.vocab.id_of(b"ab")
    assert stream.ids.tolist() == [merged_id, merged_id]


def test_bpe_merge_rank_order():
    # merges apply in rank order: "ab" forms before "bc" can
    model = _byte_model([(b"a", b"b"), (b"b", b"c")])
    ids = encode(model, "abc").ids.tolist()
    assert ids == [model.vocab.id_of(b"ab"), model.vocab.id_of(b"c")]


def test_encode_records_source_sizes():
    model = _byte_model()
    stream = encode(model, "aé")
    assert stream.source_chars == 2
    assert stream.source_bytes == 3
    assert stream.n == 3  # byte-level


def test_decode_out_of_range_id():
    model = _byte_model()
    with pytest.raises(TokenizerError, match="out of range"):
        decode(model, TokenStream(ids=np.array([10_000]), source_chars=0, source_bytes=0))


def test_decode_empty():
    assert decode(_byte_model(), TokenStream(ids=np.array([], dtype=np.int64), source_chars=0, source_bytes=0)) == ""


@settings(max_examples=300)
@given(text=st.text(max_size=80))
def test_byte_level_roundtrip_random_strings(small_bpe_model, text):
    assert decode(small_bpe_model, encode(small_bpe_model, text)) == text


def test_wordlevel_unk_fallback():
    tokens = list(SPECIAL_TOKENS) + ["the", "cat"]
    model = TokenizerModel(
        family="wordlevel", vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS)
    )
    stream = encode(model, "the dog")
    assert stream.ids.tolist() == [model.vocab.id_of("the"), UNK_ID]
    assert decode(model, stream) == "the <unk>"


def test_unigram_viterbi_vs_exhaustive_enumeration():
    # oracle: enumerate all segmentations, pick the max scoring one
    tokens = list(SPECIAL_TOKENS) + ["a", "b", "ab"]
    scores = {
        model_id: s
        for model_id, s in zip(
            range(4, 7), [np.log(0.3), np.log(0.2), np.log(0.45)]
        )
    }
    scores[UNK_ID] = -50.0
    model = TokenizerModel(
        family="unigram",
        vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS),
        scores=scores,
    )

    def enumerate_segmentations(s):
        if not s:
            yield []
            return
        for take in range(1, len(s) + 1):
            head = s[:take]
            if model.vocab.id_of(head) in scores:
                for rest in enumerate_segmentations(s[take:]):
                    yield [head] + rest

    best = max(
        enumerate_segmentations("ab"),
        key=lambda seg: sum(scores[model.vocab.id_of(t)] for t in seg),
    )
    assert best == ["ab"]
    assert [model.vocab.token(i) for i in encode(model, "ab").ids.tolist()] == best


def test_wordpiece_longest_match_and_unk():
    tokens = list(SPECIAL_TOKENS) + ["hel", "##lo", " wor", "##ld", "x"]
    model = TokenizerModel(
        family="wordpiece", vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS)
    )
    stream = encode(model, "hello world")
    assert [model.vocab.token(i) for i in stream.ids.tolist()] == ["hel", "##lo", " wor", "##ld"]
    assert decode(model, stream) == "hello world"
    # unmatched position turns the whole piece into <unk>
    assert encode(model, "hello qqq").ids.tolist()[-1] == UNK_ID


# ---------------------------------------------------------------------------
# serialization


def test_save_load_roundtrip(tmp_path, small_bpe_model):
    path = tmp_path / "m.json"
    save_model(small_bpe_model, path)
    loaded = load_model(path)
    assert loaded.family == small_bpe_model.family
    assert loaded.merges == small_bpe_model.merges
    assert list(loaded.vocab.entries()) == list(small_bpe_model.vocab.entries())
    assert loaded.preprocessing == small_bpe_model.preprocessing


def test_save_load_save_fixed_point(tmp_path, small_bpe_model):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(small_bpe_model, p1)
    save_model(load_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_unknown_family_named_in_error(tmp_path):
    path = tmp_path / "bad.json"
    obj = model_to_json_dict(_byte_model())
    obj["family"] = "mystery"
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(TokenizerError, match="mystery"):
        load_model(path)


def test_load_duplicate_token_rejected(tmp_path):
    path = tmp_path / "bad.json"
    obj = model_to_json_dict(_byte_model())
    obj["vocab"][5][0] = obj["vocab"][4][0]
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(TokenizerError):
        load_model(path)


def test_load_version_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    obj = model_to_json_dict(_byte_model())
    obj["format_version"] = 99
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(TokenizerError, match="format_version"):
        load_model(path)


# ---------------------------------------------------------------------------
# rank-list models


def _write_ranklist(path, entries):
    lines = [f"{base64.b64encode(tok).decode()} {rank}" for tok, rank in entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_ranklist_identity_byte_tokenizer(tmp_path):
    path = tmp_path / "ranks.txt"
    _write_ranklist(path, [(bytes([b]), b) for b in range(256)])
    model = load_rank_list_model(path)
    assert model.vocab.size == 256
    assert model.rank_gaps == 0
    ids = encode(model, "abc").ids.tolist()
    assert ids == [97, 98, 99]


def test_ranklist_lowest_rank_merge_loop(tmp_path):
    # hand-applied: merging "ab" (rank 2) wins over leaving single bytes
    path = tmp_path / "ranks.txt"
    _write_ranklist(path, [(b"a", 0), (b"b", 1), (b"ab", 2)])
    model = load_rank_list_model(path)
    assert [model.vocab.token(i) for i in encode(model, "abab").ids.tolist()] == [b"ab", b"ab"]


def test_ranklist_bad_base64_reports_line(tmp_path):
    path = tmp_path / "ranks.txt"
    path.write_text("!!!! 0\n", encoding="utf-8")
    with pytest.raises(TokenizerError, match=":1"):
        load_rank_list_model(path)


def test_ranklist_non_dense_ranks_recorded(tmp_path):
    path = tmp_path / "ranks.txt"
    _write_ranklist(path, [(b"a", 0), (b"b", 5)])
    model = load_rank_list_model(path)
    assert model.rank_gaps == 4
    assert model.vocab.size == 2


def test_ranklist_gpt_style_greedy_on_longer_text(tmp_path):
    # rank priority: " t"(3) preferred to "th"(4) inside " the"
    entries = [(bytes([b]), b) for b in range(256)]
    entries += [(b" t", 256), (b"th", 257), (b" th", 258), (b" the", 259)]
    path = tmp_path / "ranks.txt"
    _write_ranklist(path, [(tok, i) for i, (tok, _) in enumerate(entries)])
    model = load_rank_list_model(path)
    toks = [model.vocab.token(i) for i in encode(model, "in the").ids.tolist()]
    assert toks == [b"i", b"n", b" the"]
