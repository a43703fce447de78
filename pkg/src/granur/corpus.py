"""Documents, sentence splitting, and the hierarchical chunk pyramid.

A pyramid has ``n_gra`` granularity levels. Level 1 holds consecutive
windows of ``base_size`` tokens; each coarser level pairs two adjacent
chunks of the level below, promoting an odd trailing chunk unpaired.
Every chunk is addressed by the half-open range of level-1 ordinals it
covers, which makes containment lookups O(1).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import CorpusFormatError, EmptyDocument, OutOfRange

# Tokens are maximal runs of Unicode alphanumerics (underscore excluded);
# BM25, chunk sizing, and hitrate all share this view of text.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Sentence boundaries are suppressed right after these abbreviations.
ABBREVIATIONS = ("e.g.", "i.e.", "dr.", "fig.", "et al.")

_BOUNDARY_RE = re.compile(r"[.!?]+\s+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens of ``text``."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character spans [start, end) of each token, in order."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' followed by whitespace, guarding abbreviations.

    Joining the returned sentences reproduces the input's non-whitespace
    content in order; empty input yields an empty list.
    """
    stripped = text.strip()
    if not stripped:
        return []
    sentences = []
    start = 0
    for m in _BOUNDARY_RE.finditer(stripped):
        head = stripped[start : m.end()].rstrip()
        if head.lower().endswith(ABBREVIATIONS):
            continue
        sentences.append(head)
        start = m.end()
    tail = stripped[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass(frozen=True)
class Document:
    """One source document; ``doc_id`` must be unique within a corpus."""

    doc_id: str
    title: str
    text: str


@dataclass(frozen=True)
class Chunk:
    """A contiguous text span at one granularity level of one document.

    ``start``/``end`` delimit the half-open range of level-1 ordinals the
    chunk covers; at level 1 the width is exactly 1.
    """

    doc_id: str
    level: int
    ordinal: int
    start: int
    end: int
    text: str

    @property
    def chunk_id(self) -> tuple[str, int, int]:
        return (self.doc_id, self.level, self.ordinal)

    @property
    def finest_range(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class ChunkPyramid:
    """All granularity levels of one document; immutable once built."""

    doc_id: str
    n_gra: int
    base_size: int
    levels: list[list[Chunk]] = field(compare=False)

    @property
    def finest_count(self) -> int:
        return len(self.levels[0])


def build_pyramid(doc: Document, base_size: int, n_gra: int) -> ChunkPyramid:
    """Chunk ``doc`` into ``n_gra`` levels of non-overlapping windows.

    Level-1 chunks are windows of ``base_size`` tokens (the last may be
    shorter, never empty); level j pairs adjacent level j-1 chunks left to
    right. Raises EmptyDocument when the text has no tokens.
    """
    if base_size < 1:
        raise ValueError(f"base_size must be >= 1, got {base_size}")
    if n_gra < 1:
        raise ValueError(f"n_gra must be >= 1, got {n_gra}")
    spans = token_spans(doc.text)
    if not spans:
        raise EmptyDocument(f"document {doc.doc_id!r} has no tokens")

    finest = []
    for ordinal, i in enumerate(range(0, len(spans), base_size)):
        window = spans[i : i + base_size]
        text = doc.text[window[0][0] : window[-1][1]]
        finest.append(Chunk(doc.doc_id, 1, ordinal, ordinal, ordinal + 1, text))

    levels = [finest]
    for level in range(2, n_gra + 1):
        below = levels[-1]
        above = []
        for ordinal, i in enumerate(range(0, len(below), 2)):
            pair = below[i : i + 2]
            text = " ".join(c.text for c in pair)
            above.append(
                Chunk(doc.doc_id, level, ordinal, pair[0].start, pair[-1].end, text)
            )
        levels.append(above)
    return ChunkPyramid(doc.doc_id, n_gra, base_size, levels)


def containing_chunk(pyramid: ChunkPyramid, finest_ordinal: int, level: int) -> Chunk:
    """The unique level-``level`` chunk whose range contains ``finest_ordinal``."""
    if not 1 <= level <= pyramid.n_gra:
        raise OutOfRange(f"level {level} outside [1, {pyramid.n_gra}]")
    if not 0 <= finest_ordinal < pyramid.finest_count:
        raise OutOfRange(
            f"finest ordinal {finest_ordinal} outside [0, {pyramid.finest_count})"
        )
    # Left-to-right pairing with odd-tail promotion means the level-j chunk i
    # covers [i * 2**(j-1), min((i+1) * 2**(j-1), finest_count)).
    return pyramid.levels[level - 1][finest_ordinal >> (level - 1)]


def load_corpus(path: str) -> list[Document]:
    """Read a JSON Lines corpus: one {"id", "title", "text"} object per line."""
    docs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise CorpusFormatError(f"{path}:{lineno}: expected object with id/text")
            doc_id = str(obj["id"])
            if doc_id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate doc id {doc_id!r}")
            seen.add(doc_id)
            text = str(obj["text"])
            if not text.strip():
                raise CorpusFormatError(f"{path}:{lineno}: empty text for {doc_id!r}")
            docs.append(Document(doc_id, str(obj.get("title", "")), text))
    return docs
