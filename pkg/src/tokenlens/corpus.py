"""Corpus ingestion: local text/JSONL files -> character streams -> train/test splits.

The split protocol is deterministic: the test tail is always the final
``test_chars`` characters of the full stream, shared byte-identically by every
split, and train prefixes are nested initial prefixes of the stream.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


class CorpusError(ValueError):
    """Raised for unreadable inputs or impossible split requests."""


@dataclass(frozen=True)
class Document:
    """One unit of raw text with a source-unique id."""

    id: str
    text: str


@dataclass
class SkipTally:
    """Counts of documents/lines rejected during loading."""

    invalid_utf8: int = 0
    malformed_json: int = 0
    missing_text_field: int = 0
    details: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.invalid_utf8 + self.malformed_json + self.missing_text_field

    def _note(self, kind: str, where: str) -> None:
        setattr(self, kind, getattr(self, kind) + 1)
        if len(self.details) < 50:
            self.details.append(f"{kind}: {where}")


@dataclass(frozen=True)
class CharStream:
    """An immutable stream of Unicode scalar values from one source."""

    source_id: str
    text: str

    @property
    def char_count(self) -> int:
        return len(self.text)

    def content_hash(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CorpusSplit:
    """A (train prefix, held-out test tail) partition of one CharStream."""

    train_prefix: CharStream
    test_tail: CharStream
    train_target_chars: int
    test_chars: int


def _detect_format(path: Path) -> str:
    return "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "text"


def load_documents(
    path: str | Path,
    format: str = "auto",
    skips: SkipTally | None = None,
) -> Iterator[Document]:
    """Yield Documents from a plain-text or JSONL file, in file order.

    Plain-text files load as a single Document (id = file path). JSONL files
    yield one Document per line from the required string field ``text``;
    malformed lines are skipped and recorded in ``skips`` with their line
    number, and the remaining lines are still yielded.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"not a readable file: {path}")
    if format == "auto":
        format = _detect_format(path)
    if format not in ("text", "jsonl"):
        raise CorpusError(f"unknown corpus format: {format!r}")
    skips = skips if skips is not None else SkipTally()

    if format == "text":
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError:
            skips._note("invalid_utf8", str(path))
            return
        yield Document(id=str(path), text=text)
        return

    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                skips._note("invalid_utf8", f"{path}:{lineno}")
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                skips._note("malformed_json", f"{path}:{lineno}")
                continue
            text = obj.get("text") if isinstance(obj, dict) else None
            if not isinstance(text, str):
                skips._note("missing_text_field", f"{path}:{lineno}")
                continue
            yield Document(id=obj.get("id", f"{path.name}:{lineno}"), text=text)


def stream_characters(
    docs: Iterable[Document | str],
    max_chars: int,
    separator: str = "\n",
    source_id: str = "stream",
) -> CharStream:
    """Concatenate document texts (joined by ``separator``) into a CharStream.

    Stops once ``max_chars`` characters are available; the result holds exactly
    min(max_chars, available) characters.
    """
    if max_chars <= 0:
        raise CorpusError(f"max_chars must be positive, got {max_chars}")
    parts: list[str] = []
    size = 0
    for doc in docs:
        text = doc if isinstance(doc, str) else doc.text
        if parts:
            parts.append(separator)
            size += len(separator)
        parts.append(text)
        size += len(text)
        if size >= max_chars:
            break
    joined = "".join(parts)
    return CharStream(source_id=source_id, text=joined[:max_chars])


def split_train_test(
    stream: CharStream,
    train_sizes: list[int],
    test_chars: int = 10_000_000,
) -> list[CorpusSplit]:
    """Cut one shared test tail plus nested train prefixes out of a stream.

    Every returned split shares the identical test tail (the final
    ``test_chars`` characters); each train prefix is an initial prefix of the
    stream truncated to its target size, so smaller prefixes are prefixes of
    larger ones.
    """
    if not train_sizes:
        raise CorpusError("train_sizes must be nonempty")
    if any(s <= 0 for s in train_sizes):
        raise CorpusError(f"train sizes must be positive: {train_sizes}")
    if test_chars <= 0:
        raise CorpusError(f"test_chars must be positive, got {test_chars}")
    required = max(train_sizes) + test_chars
    if stream.char_count < required:
        raise CorpusError(
            f"stream too short: need {required} chars "
            f"(max train {max(train_sizes)} + test {test_chars}), "
            f"have {stream.char_count}"
        )
    tail = CharStream(
        source_id=f"{stream.source_id}/test[{test_chars}]",
        text=stream.text[-test_chars:],
    )
    splits = []
    for size in train_sizes:
        prefix = CharStream(
            source_id=f"{stream.source_id}/train[{size}]",
            text=stream.text[:size],
        )
        splits.append(
            CorpusSplit(
                train_prefix=prefix,
                test_tail=tail,
                train_target_chars=size,
                test_chars=test_chars,
            )
        )
    return splits
