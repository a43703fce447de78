"""BM25 inverted indexes, one per granularity level, plus disk round-trip.

The on-disk layout is one directory per (corpus, level): ``header.json``
with the scoring parameters and chunk metadata, and ``postings.bin`` with
a little-endian u32 term table followed by delta-encoded posting lists.
Save -> load -> save is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
import struct
from collections import Counter
from dataclasses import dataclass

from .corpus import (
    Chunk,
    ChunkPyramid,
    Document,
    build_pyramid,
    containing_chunk,
    load_corpus,
    tokenize,
)
from .errors import CorpusFormatError, EmptyCorpus, InconsistentPyramid

ChunkId = tuple[str, int, int]  # (doc_id, level, ordinal)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_HEADER_NAME = "header.json"
_POSTINGS_NAME = "postings.bin"


class Bm25Index:
    """Immutable BM25 index over one granularity level's chunks."""

    def __init__(
        self,
        postings: dict[str, list[tuple[int, int]]],
        doc_lengths: list[int],
        chunk_refs: list[ChunkId],
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ):
        if len(doc_lengths) != len(chunk_refs):
            raise ValueError("doc_lengths and chunk_refs must have equal length")
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.chunk_refs = chunk_refs
        self.k1 = k1
        self.b = b
        self.avg_dl = sum(doc_lengths) / len(doc_lengths)

    @property
    def n_chunks(self) -> int:
        return len(self.chunk_refs)

    def idf(self, term: str) -> float:
        """Non-negative idf: ln(1 + (N - n + 0.5) / (n + 0.5))."""
        n = len(self.postings.get(term, ()))
        big_n = self.n_chunks
        return math.log(1.0 + (big_n - n + 0.5) / (n + 0.5))


def build_index(chunks: list[Chunk], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    """Tokenize ``chunks`` and build their inverted index."""
    if not chunks:
        raise EmptyCorpus("cannot build an index over zero chunks")
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths = []
    for ordinal, chunk in enumerate(chunks):
        tokens = tokenize(chunk.text)
        doc_lengths.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((ordinal, tf))
    if sum(doc_lengths) == 0:
        raise EmptyCorpus("chunks contain no tokens")
    return Bm25Index(postings, doc_lengths, [c.chunk_id for c in chunks], k1, b)


def search(index: Bm25Index, query: str, k: int) -> list[tuple[ChunkId, float]]:
    """Top-``k`` chunks by BM25 score; zero-overlap chunks are excluded.

    Scores are non-increasing; ties break by ascending chunk ordinal, so
    the result for k is always a prefix of the result for k + 1.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores: dict[int, float] = {}
    k1, b, avg_dl = index.k1, index.b, index.avg_dl
    for term in tokenize(query):
        entries = index.postings.get(term)
        if not entries:
            continue
        idf = index.idf(term)
        for ordinal, tf in entries:
            dl = index.doc_lengths[ordinal]
            gain = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg_dl))
            scores[ordinal] = scores.get(ordinal, 0.0) + gain
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [(index.chunk_refs[ordinal], score) for ordinal, score in ranked[:k]]


@dataclass(frozen=True)
class GranularityIndexSet:
    """One Bm25Index per granularity level over one corpus."""

    per_level: list[Bm25Index]

    @property
    def n_gra(self) -> int:
        return len(self.per_level)


def build_index_set(
    pyramids: list[ChunkPyramid], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> GranularityIndexSet:
    """Index every level of ``pyramids`` (all pyramids must share n_gra)."""
    if not pyramids:
        raise EmptyCorpus("no pyramids to index")
    n_gra = pyramids[0].n_gra
    if any(p.n_gra != n_gra for p in pyramids):
        raise ValueError("all pyramids must have the same number of levels")
    per_level = []
    for level in range(n_gra):
        chunks = [c for p in pyramids for c in p.levels[level]]
        per_level.append(build_index(chunks, k1, b))
    return GranularityIndexSet(per_level)


def search_all_levels(
    index_set: GranularityIndexSet, query: str, k_r: int
) -> list[list[tuple[ChunkId, float]]]:
    """Top-``k_r`` hits per level; the candidate pool is at most n_gra * k_r."""
    if k_r < 1:
        raise ValueError(f"k_r must be >= 1, got {k_r}")
    return [search(index, query, k_r) for index in index_set.per_level]


def save_index(index: Bm25Index, dir_path: str) -> None:
    """Write header.json + postings.bin under ``dir_path`` (created if needed)."""
    os.makedirs(dir_path, exist_ok=True)
    header = {
        "avg_dl": index.avg_dl,
        "b": index.b,
        "chunk_refs": [list(ref) for ref in index.chunk_refs],
        "doc_lengths": index.doc_lengths,
        "k1": index.k1,
        "n_chunks": index.n_chunks,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    _atomic_write(os.path.join(dir_path, _HEADER_NAME), header_bytes)

    parts = [struct.pack("<I", len(index.postings))]
    terms = sorted(index.postings)
    for term in terms:
        raw = term.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    for term in terms:
        entries = index.postings[term]
        parts.append(struct.pack("<I", len(entries)))
        prev = 0
        for ordinal, tf in entries:
            parts.append(struct.pack("<II", ordinal - prev, tf))
            prev = ordinal
    _atomic_write(os.path.join(dir_path, _POSTINGS_NAME), b"".join(parts))


def load_index(dir_path: str) -> Bm25Index:
    """Inverse of save_index; round-trips bit-exact."""
    with open(os.path.join(dir_path, _HEADER_NAME), encoding="utf-8") as fh:
        header = json.load(fh)
    with open(os.path.join(dir_path, _POSTINGS_NAME), "rb") as fh:
        blob = fh.read()

    offset = 0

    def read_u32() -> int:
        nonlocal offset
        (value,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        return value

    try:
        n_terms = read_u32()
        terms = []
        for _ in range(n_terms):
            size = read_u32()
            terms.append(blob[offset : offset + size].decode("utf-8"))
            offset += size
        postings: dict[str, list[tuple[int, int]]] = {}
        for term in terms:
            n_entries = read_u32()
            entries = []
            ordinal = 0
            for _ in range(n_entries):
                ordinal += read_u32()
                entries.append((ordinal, read_u32()))
            postings[term] = entries
    except struct.error as exc:
        raise CorpusFormatError(f"{dir_path}: truncated postings file") from exc

    index = Bm25Index(
        postings,
        [int(n) for n in header["doc_lengths"]],
        [(str(d), int(lv), int(o)) for d, lv, o in header["chunk_refs"]],
        float(header["k1"]),
        float(header["b"]),
    )
    if index.n_chunks != int(header["n_chunks"]):
        raise CorpusFormatError(f"{dir_path}: n_chunks disagrees with chunk_refs")
    return index


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class CorpusSet:
    """An indexed corpus: documents, their chunk pyramids, and the per-level
    BM25 indexes, behind the retrieval surface the selection module uses.
    """

    kind = "chunks"

    def __init__(
        self,
        docs: list[Document],
        pyramids: dict[str, ChunkPyramid],
        index_set: GranularityIndexSet,
        name: str = "corpus",
    ):
        self.docs = docs
        self.pyramids = pyramids
        self.index_set = index_set
        self.name = name

    @classmethod
    def build(
        cls,
        docs: list[Document],
        n_gra: int = 5,
        base_size: int = 64,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        name: str = "corpus",
    ) -> "CorpusSet":
        pyramids = {d.doc_id: build_pyramid(d, base_size, n_gra) for d in docs}
        index_set = build_index_set(list(pyramids.values()), k1, b)
        return cls(docs, pyramids, index_set, name)

    @property
    def n_gra(self) -> int:
        return self.index_set.n_gra

    @property
    def level1_index(self) -> Bm25Index:
        return self.index_set.per_level[0]

    def search_all_levels(self, query: str, k_r: int) -> list[list[tuple[ChunkId, float]]]:
        return search_all_levels(self.index_set, query, k_r)

    def snippet(self, chunk_id: ChunkId) -> Chunk:
        doc_id, level, ordinal = chunk_id
        try:
            return self.pyramids[doc_id].levels[level - 1][ordinal]
        except (KeyError, IndexError) as exc:
            raise InconsistentPyramid(f"unknown chunk {chunk_id!r}") from exc

    def covered_finest(self, chunk_id: ChunkId) -> list[tuple[str, int]]:
        """Finest (doc_id, ordinal) pairs whose containment chain includes the chunk."""
        chunk = self.snippet(chunk_id)
        return [(chunk.doc_id, f) for f in range(chunk.start, chunk.end)]

    def container(self, finest_key: tuple[str, int], level: int) -> Chunk:
        doc_id, finest_ordinal = finest_key
        if doc_id not in self.pyramids:
            raise InconsistentPyramid(f"unknown document {doc_id!r}")
        return containing_chunk(self.pyramids[doc_id], finest_ordinal, level)

    def with_levels(self, n_levels: int) -> "CorpusSet":
        """A shallow view restricted to the finest ``n_levels`` levels."""
        if not 1 <= n_levels <= self.n_gra:
            raise ValueError(f"n_levels must be in [1, {self.n_gra}]")
        pyramids = {
            doc_id: ChunkPyramid(p.doc_id, n_levels, p.base_size, p.levels[:n_levels])
            for doc_id, p in self.pyramids.items()
        }
        return CorpusSet(
            self.docs,
            pyramids,
            GranularityIndexSet(self.index_set.per_level[:n_levels]),
            self.name,
        )

    def save(self, dir_path: str) -> None:
        """Persist as meta.json + corpus.jsonl + level_N index directories."""
        os.makedirs(dir_path, exist_ok=True)
        any_pyramid = next(iter(self.pyramids.values()))
        meta = {
            "base_size": any_pyramid.base_size,
            "b": self.level1_index.b,
            "k1": self.level1_index.k1,
            "kind": self.kind,
            "n_gra": self.n_gra,
            "name": self.name,
        }
        _atomic_write(
            os.path.join(dir_path, "meta.json"),
            json.dumps(meta, sort_keys=True, separators=(",", ":")).encode(),
        )
        lines = [
            json.dumps(
                {"id": d.doc_id, "title": d.title, "text": d.text},
                sort_keys=True,
                separators=(",", ":"),
            )
            for d in self.docs
        ]
        _atomic_write(
            os.path.join(dir_path, "corpus.jsonl"), ("\n".join(lines) + "\n").encode()
        )
        for level, index in enumerate(self.index_set.per_level, 1):
            save_index(index, os.path.join(dir_path, f"level_{level}"))

    @classmethod
    def load(cls, dir_path: str) -> "CorpusSet":
        with open(os.path.join(dir_path, "meta.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("kind") != cls.kind:
            raise CorpusFormatError(f"{dir_path}: not a chunk-based corpus directory")
        docs = load_corpus(os.path.join(dir_path, "corpus.jsonl"))
        n_gra = int(meta["n_gra"])
        base_size = int(meta["base_size"])
        pyramids = {d.doc_id: build_pyramid(d, base_size, n_gra) for d in docs}
        per_level = [
            load_index(os.path.join(dir_path, f"level_{level}"))
            for level in range(1, n_gra + 1)
        ]
        return cls(docs, pyramids, GranularityIndexSet(per_level), str(meta["name"]))
