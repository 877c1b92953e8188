"""Minimal ctypes binding for the system libzstd (one-shot compress/decompress).

Produces standard zstd frames (magic 0x28B52FFD), so output can be checked
with external zstd tooling. Only the simple API is bound; no streaming,
no dictionaries.
"""

from __future__ import annotations

import ctypes
import ctypes.util


class ZstdUnavailable(RuntimeError):
    pass


def _load() -> ctypes.CDLL:
    candidates = ["libzstd.so.1", "libzstd.so", "libzstd.dylib"]
    found = ctypes.util.find_library("zstd")
    if found:
        candidates.insert(0, found)
    for name in candidates:
        try:
            lib = ctypes.CDLL(name)
        except OSError:
            continue
        lib.ZSTD_compressBound.restype = ctypes.c_size_t
        lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
        lib.ZSTD_compress.restype = ctypes.c_size_t
        lib.ZSTD_compress.argtypes = [
            ctypes.c_void_p, ctypes.c_size_t,
            ctypes.c_void_p, ctypes.c_size_t,
            ctypes.c_int,
        ]
        lib.ZSTD_decompress.restype = ctypes.c_size_t
        lib.ZSTD_decompress.argtypes = [
            ctypes.c_void_p, ctypes.c_size_t,
            ctypes.c_void_p, ctypes.c_size_t,
        ]
        lib.ZSTD_isError.restype = ctypes.c_uint
        lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
        lib.ZSTD_getFrameContentSize.restype = ctypes.c_ulonglong
        lib.ZSTD_getFrameContentSize.argtypes = [ctypes.c_void_p, ctypes.c_size_t]
        return lib
    raise ZstdUnavailable("no libzstd shared library found")


_LIB: ctypes.CDLL | None = None


def _lib() -> ctypes.CDLL:
    global _LIB
    if _LIB is None:
        _LIB = _load()
    return _LIB


def available() -> bool:
    try:
        _lib()
        return True
    except ZstdUnavailable:
        return False


def compress(data: bytes, level: int = 3) -> bytes:
    lib = _lib()
    bound = lib.ZSTD_compressBound(len(data))
    dst = ctypes.create_string_buffer(bound)
    n = lib.ZSTD_compress(dst, bound, data, len(data), level)
    if lib.ZSTD_isError(n):
        raise RuntimeError(f"zstd compression failed (code {n})")
    return dst.raw[:n]


def decompress(data: bytes) -> bytes:
    lib = _lib()
    size = lib.ZSTD_getFrameContentSize(data, len(data))
    # ZSTD_CONTENTSIZE_UNKNOWN / _ERROR are huge sentinel values
    if size >= 2**64 - 2:
        raise RuntimeError("zstd frame with unknown or invalid content size")
    dst = ctypes.create_string_buffer(max(int(size), 1))
    n = lib.ZSTD_decompress(dst, int(size), data, len(data))
    if lib.ZSTD_isError(n):
        raise RuntimeError(f"zstd decompression failed (code {n})")
    return dst.raw[:n]
