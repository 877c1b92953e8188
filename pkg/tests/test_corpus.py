import hashlib
import json

import pytest

from tokenlens.corpus import (
    CharStream,
    CorpusError,
    Document,
    SkipTally,
    load_documents,
    split_train_test,
    stream_characters,
)


def test_load_jsonl_documents(tmp_path):
    path = tmp_path / "docs.jsonl"
    path.write_text('{"text":"ab"}\n{"text":"cd"}\n', encoding="utf-8")
    docs = list(load_documents(path, format="jsonl"))
    assert [d.text for d in docs] == ["ab", "cd"]


def test_load_jsonl_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert list(load_documents(path, format="jsonl")) == []


def test_load_jsonl_missing_text_field_skips_line_but_yields_others(tmp_path):
    path = tmp_path / "docs.jsonl"
    path.write_text('{"text":"ab"}\n{"txt":"x"}\n{"text":"cd"}\n', encoding="utf-8")
    skips = SkipTally()
    docs = list(load_documents(path, format="jsonl", skips=skips))
    assert [d.text for d in docs] == ["ab", "cd"]
    assert skips.missing_text_field == 1
    assert any(":2" in d for d in skips.details)  # reported with its line number


def test_load_jsonl_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "docs.jsonl"
    path.write_text('{"text":"ok"}\nnot json\n', encoding="utf-8")
    skips = SkipTally()
    docs = list(load_documents(path, format="jsonl", skips=skips))
    assert len(docs) == 1
    assert skips.malformed_json == 1


def test_load_jsonl_invalid_utf8_document_counted(tmp_path):
    path = tmp_path / "docs.jsonl"
    path.write_bytes(b'{"text":"ok"}\n{"text":"\xff\xfe"}\n')
    skips = SkipTally()
    docs = list(load_documents(path, format="jsonl", skips=skips))
    assert [d.text for d in docs] == ["ok"]
    assert skips.invalid_utf8 == 1


def test_load_plain_text_single_document(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("hello\nworld", encoding="utf-8")
    docs = list(load_documents(path, format="text"))
    assert len(docs) == 1 and docs[0].text == "hello\nworld"


def test_load_documents_missing_file(tmp_path):
    with pytest.raises(CorpusError):
        list(load_documents(tmp_path / "nope.txt"))


def test_stream_characters_concatenates_with_separator():
    s = stream_characters([Document("1", "ab"), Document("2", "cd")], 10, separator="\n")
    assert s.text == "ab\ncd"
    assert s.char_count == 5


def test_stream_characters_truncates():
    s = stream_characters([Document("1", "abcdef")], 3)
    assert s.text == "abc" and s.char_count == 3


def test_stream_characters_empty_docs():
    s = stream_characters([], 5)
    assert s.text == "" and s.char_count == 0


def test_stream_characters_counts_unicode_scalars():
    s = stream_characters([Document("1", "aé中𝄞")], 10)
    assert s.char_count == 4


def test_split_index_arithmetic_checked_by_hand():
    # 30 chars; train sizes 5 and 10 with a 10-char test tail:
    # tails must both equal chars 21..30, prefixes chars 1..5 and 1..10
    text = "abcdefghijklmnopqrstuvwxyz0123"
    stream = CharStream("x", text)
    splits = split_train_test(stream, [5, 10], test_chars=10)
    assert splits[0].test_tail.text == text[20:30]
    assert splits[1].test_tail.text == text[20:30]
    assert splits[0].train_prefix.text == text[:5]
    assert splits[1].train_prefix.text == text[:10]


def test_split_shared_tail_hash_across_decades():
    stream = CharStream("x", "z" * 100 + "q" * 11_000)
    sizes = [10, 100, 1000]
    splits = split_train_test(stream, sizes, test_chars=10_000)
    hashes = {hashlib.sha256(s.test_tail.text.encode()).hexdigest() for s in splits}
    assert len(hashes) == 1
    for small, big in zip(splits, splits[1:]):
        assert big.train_prefix.text.startswith(small.train_prefix.text)


def test_split_overlap_forbidden():
    with pytest.raises(CorpusError, match="need 15"):
        split_train_test(CharStream("x", "ab" * 5), [5], test_chars=10)


def test_split_deterministic_across_runs(small_english):
    stream = CharStream("eng", small_english)
    a = split_train_test(stream, [1000, 5000], 20_000)
    b = split_train_test(stream, [1000, 5000], 20_000)
    assert all(
        x.train_prefix.text == y.train_prefix.text and x.test_tail.text == y.test_tail.text
        for x, y in zip(a, b)
    )


def test_jsonl_roundtrip_through_stream(tmp_path):
    rows = [{"text": f"doc {i} body"} for i in range(5)]
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    docs = list(load_documents(path))
    s = stream_characters(docs, 10_000)
    assert s.text == "\n".join(r["text"] for r in rows)
