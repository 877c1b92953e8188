"""Tokenize-then-compress pipelines and their raw-byte baselines.

Token ids are packed as little-endian fixed-width unsigned integers (16 or
32 bits) before compression. Compressed outputs use the standard gzip, xz
(LZMA) and zstd container formats. Default levels: gzip 6, zstd 3, lzma 6;
levels are recorded in every report because bpc values depend on them.
"""

from __future__ import annotations

import gzip
import lzma
from dataclasses import dataclass, field

import numpy as np

from . import zstd_binding
from .tokenizer import TokenizerModel, TokenStream, encode, prepare_text

DEFAULT_LEVELS = {"gzip": 6, "zstd": 3, "lzma": 6}

ALGORITHMS = ("gzip", "zstd", "lzma")


class LzPipeError(ValueError):
    pass


@dataclass(frozen=True)
class Compressor:
    """A named universal compressor at a fixed level."""

    algorithm: str
    level: int

    def compress(self, data: bytes) -> bytes:
        if self.algorithm == "gzip":
            return gzip.compress(data, compresslevel=self.level, mtime=0)
        if self.algorithm == "lzma":
            return lzma.compress(data, preset=self.level)
        if self.algorithm == "zstd":
            return zstd_binding.compress(data, level=self.level)
        raise LzPipeError(f"unknown compressor {self.algorithm!r}")

    def decompress(self, data: bytes) -> bytes:
        if self.algorithm == "gzip":
            return gzip.decompress(data)
        if self.algorithm == "lzma":
            return lzma.decompress(data)
        if self.algorithm == "zstd":
            return zstd_binding.decompress(data)
        raise LzPipeError(f"unknown compressor {self.algorithm!r}")


def get_compressor(name: str, level: int | None = None) -> Compressor:
    if name not in ALGORITHMS:
        raise LzPipeError(f"unknown compressor {name!r}; expected one of {ALGORITHMS}")
    return Compressor(name, DEFAULT_LEVELS[name] if level is None else level)


@dataclass(frozen=True)
class PackedIdStream:
    data: bytes
    width: int
    count: int


def pack_token_ids(stream: TokenStream | np.ndarray, width: int = 16) -> PackedIdStream:
    """Pack ids as little-endian unsigned ints of the given bit width."""
    ids = stream.ids if isinstance(stream, TokenStream) else np.asarray(stream, dtype=np.int64)
    if width not in (16, 32):
        raise LzPipeError(f"width must be 16 or 32, got {width}")
    limit = 1 << width
    if ids.size:
        if int(ids.min()) < 0:
            pos = int(np.argmax(ids < 0))
            raise LzPipeError(f"negative id {int(ids[pos])} at position {pos}")
        if int(ids.max()) >= limit:
            pos = int(np.argmax(ids >= limit))
            raise LzPipeError(
                f"id {int(ids[pos])} at position {pos} overflows width {width} "
                f"(max {limit - 1})"
            )
    dtype = "<u2" if width == 16 else "<u4"
    return PackedIdStream(data=ids.astype(dtype).tobytes(), width=width, count=int(ids.size))


def unpack_token_ids(packed: PackedIdStream) -> np.ndarray:
    dtype = "<u2" if packed.width == 16 else "<u4"
    ids = np.frombuffer(packed.data, dtype=dtype).astype(np.int64)
    if ids.size != packed.count:
        raise LzPipeError(f"packed stream count mismatch: {ids.size} != {packed.count}")
    return ids


def width_for_vocab(vocab_size: int) -> int:
    return 16 if vocab_size <= (1 << 16) else 32


def raw_lz_bpc(text: str, compressor: Compressor) -> float:
    """Bits per character of compressing the raw UTF-8 bytes."""
    if not text:
        raise LzPipeError("empty text")
    compressed = compressor.compress(text.encode("utf-8"))
    return 8.0 * len(compressed) / len(text)


def token_lz_bpc(
    model: TokenizerModel,
    text: str,
    compressor: Compressor,
    width: int | None = None,
) -> float:
    """Bits per character of compressing the packed token-id stream.

    The denominator is the character count of the input text, matching the
    raw pipeline so the two bpc figures are directly comparable.
    """
    if not text:
        raise LzPipeError("empty text")
    if width is None:
        width = width_for_vocab(model.vocab.size)
    stream = encode(model, prepare_text(model, text))
    packed = pack_token_ids(stream, width)
    compressed = compressor.compress(packed.data)
    return 8.0 * len(compressed) / len(text)


@dataclass
class PipelineCell:
    name: str
    bpc: float
    delta_vs_raw: float  # (token_bpc - raw_bpc) / raw_bpc; negative is better


@dataclass
class PipelineRow:
    compressor: str
    level: int
    raw_bpc: float
    cells: list[PipelineCell] = field(default_factory=list)


@dataclass
class PipelineReport:
    rows: list[PipelineRow]
    pack_width: int

    def to_json_dict(self) -> dict:
        return {
            "pack_width": self.pack_width,
            "rows": [
                {
                    "compressor": r.compressor,
                    "level": r.level,
                    "raw_bpc": r.raw_bpc,
                    "models": {c.name: {"bpc": c.bpc, "delta_vs_raw": c.delta_vs_raw} for c in r.cells},
                }
                for r in self.rows
            ],
        }

    def format_table(self) -> str:
        names = [c.name for c in self.rows[0].cells] if self.rows else []
        header = ["compressor", "raw"] + names
        lines = ["\t".join(header)]
        for r in self.rows:
            cols = [f"{r.compressor}({r.level})", f"{r.raw_bpc:.3f}"]
            for c in r.cells:
                cols.append(f"{c.bpc:.3f} ({c.delta_vs_raw:+.1%})")
            lines.append("\t".join(cols))
        return "\n".join(lines)


def pipeline_report(
    models: list[tuple[str, TokenizerModel]],
    text: str,
    compressors: list[Compressor],
    width: int | None = None,
) -> PipelineReport:
    """Raw vs token-LZ bpc for every (model, compressor) cell.

    Token streams are encoded once per model and reused across compressors.
    """
    if not text:
        raise LzPipeError("empty text")
    if not compressors:
        raise LzPipeError("no compressors given")
    chars = len(text)
    packed: list[tuple[str, bytes]] = []
    for name, model in models:
        w = width_for_vocab(model.vocab.size) if width is None else width
        stream = encode(model, prepare_text(model, text))
        packed.append((name, pack_token_ids(stream, w).data))
    raw = text.encode("utf-8")
    rows = []
    used_width = width if width is not None else max(
        [width_for_vocab(m.vocab.size) for _, m in models], default=16
    )
    for comp in compressors:
        raw_bpc = 8.0 * len(comp.compress(raw)) / chars
        row = PipelineRow(compressor=comp.algorithm, level=comp.level, raw_bpc=raw_bpc)
        for name, data in packed:
            bpc = 8.0 * len(comp.compress(data)) / chars
            row.cells.append(
                PipelineCell(name=name, bpc=bpc, delta_vs_raw=(bpc - raw_bpc) / raw_bpc)
            )
        rows.append(row)
    return PipelineReport(rows=rows, pack_width=used_width)
