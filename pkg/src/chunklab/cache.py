"""On-disk caches for chunk/query embeddings and generated contexts.

Embedding cache file layout (little-endian):
  magic "CLEC" | u32 version | u32 dim | u64 count
  count * dim float32 rows
  offset table: count entries of (u32 id length, UTF-8 id bytes, u64 row)

One cache file exists per (corpus, provider, segmentation, chunking-mode,
contextualization) combination; the combination is hashed into the file
name, so any input change misses cleanly. Contexts are cached as JSONL
next to the embeddings, keyed the same way plus the prompt hash.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError

CACHE_MAGIC = b"CLEC"
CACHE_VERSION = 1


def content_key(*parts: str) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()[:24]


def save_vectors(path: str | Path, entries: dict[str, np.ndarray]) -> None:
    """Write id -> vector entries; all vectors must share one dimension."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ids = list(entries)
    dim = len(next(iter(entries.values()))) if entries else 0
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<IIQ", CACHE_VERSION, dim, len(ids)))
        for entry_id in ids:
            f.write(np.asarray(entries[entry_id], dtype=np.float32).tobytes())
        for row, entry_id in enumerate(ids):
            raw = entry_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<Q", row))


def load_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Read a vector cache back; returns float64 arrays of float32 values."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CACHE_MAGIC:
            raise ParseError(f"{path}: not an embedding cache (bad magic {magic!r})")
        version, dim, count = struct.unpack("<IIQ", f.read(16))
        if version != CACHE_VERSION:
            raise ParseError(f"{path}: unsupported cache version {version}")
        matrix = (
            np.frombuffer(f.read(count * dim * 4), dtype=np.float32)
            .reshape(count, dim)
            .astype(np.float64)
        )
        entries: dict[str, np.ndarray] = {}
        for _ in range(count):
            (id_len,) = struct.unpack("<I", f.read(4))
            entry_id = f.read(id_len).decode("utf-8")
            (row,) = struct.unpack("<Q", f.read(8))
            entries[entry_id] = matrix[row]
    return entries


def save_contexts(path: str | Path, contexts: dict[str, str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for chunk_id, context in contexts.items():
            f.write(json.dumps({"id": chunk_id, "context": context}, ensure_ascii=False) + "\n")


def load_contexts(path: str | Path) -> dict[str, str]:
    contexts: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                record = json.loads(line)
                contexts[record["id"]] = record["context"]
    return contexts
