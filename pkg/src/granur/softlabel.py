"""Soft-label supervision for the router.

For each QA pair, the best BM25 snippet of every granularity level is
scored against the QA label text with a pluggable similarity method; the
top-scoring level gets 0.8, the runner-up 0.2, everything else 0. Levels
that returned no snippet at all are gaps, not zero-score competitors.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from collections import Counter

import numpy as np

from .corpus import tokenize
from .embed import EmbedderConfig, embed_query
from .errors import CorpusFormatError, EmptyText, NoCandidates
from .index import Bm25Index, ChunkId
from .router import TrainExample

log = logging.getLogger(__name__)

TFIDF_COSINE = "tfidf_cosine"
HITRATE = "hitrate"
REMOTE_COSINE = "remote_embedding_cosine"
SIM_METHODS = (TFIDF_COSINE, HITRATE, REMOTE_COSINE)

DEFAULT_LABEL_VALUES = (0.8, 0.2)


@dataclass(frozen=True)
class QaExample:
    question: str
    answer: str
    snippet: str | None = None

    @property
    def label_text(self) -> str:
        """Ground-truth snippet when provided, else question + answer."""
        text = self.snippet if self.snippet else f"{self.question} {self.answer}"
        if not text.strip():
            raise EmptyText("QA example has an empty label text")
        return text


@dataclass(frozen=True)
class SoftLabel:
    values: tuple[float, ...]
    best_level: int
    second_level: int | None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def best_per_level(corpus_set, question: str) -> list[tuple[int, tuple[ChunkId, float] | None]]:
    """The single best BM25 hit of each level for ``question`` (None if no match)."""
    hits = corpus_set.search_all_levels(question, 1)
    return [
        (level, level_hits[0] if level_hits else None)
        for level, level_hits in enumerate(hits, 1)
    ]


def similarity(
    method: str,
    snippet: str,
    label: str,
    idf: Bm25Index | None = None,
    embedder: EmbedderConfig | None = None,
) -> float:
    """Score ``snippet`` against ``label`` with the chosen method.

    tfidf_cosine and hitrate return values in [0, 1];
    remote_embedding_cosine returns a cosine in [-1, 1].
    """
    if not snippet.strip() or not label.strip():
        raise EmptyText("similarity needs non-empty snippet and label")
    if method == HITRATE:
        label_tokens = set(tokenize(label))
        if not label_tokens:
            return 0.0
        snippet_tokens = set(tokenize(snippet))
        return len(label_tokens & snippet_tokens) / len(label_tokens)
    if method == TFIDF_COSINE:
        return _tfidf_cosine(snippet, label, idf)
    if method == REMOTE_COSINE:
        if embedder is None:
            raise ValueError("remote_embedding_cosine needs an embedder config")
        a = embed_query(embedder, snippet)
        b = embed_query(embedder, label)
        return float(np.clip(np.dot(a, b), -1.0, 1.0))
    raise ValueError(f"unknown similarity method {method!r}")


def _tfidf_cosine(snippet: str, label: str, idf: Bm25Index | None) -> float:
    def weights(text: str) -> dict[str, float]:
        counts = Counter(tokenize(text))
        if idf is None:
            return {t: float(c) for t, c in counts.items()}
        return {t: c * idf.idf(t) for t, c in counts.items()}

    a = weights(snippet)
    b = weights(label)
    dot = sum(v * b[t] for t, v in a.items() if t in b)
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def build_soft_label(
    sims: list[float | None], values: tuple[float, float] = DEFAULT_LABEL_VALUES
) -> SoftLabel:
    """0.8 at the argmax level, 0.2 at the runner-up, 0 elsewhere.

    ``None`` entries are absent candidates and never compete; a literal 0.0
    is a valid competitor. Ties break toward the finer (lower) level.
    """
    candidates = [(i, s) for i, s in enumerate(sims) if s is not None]
    if not candidates:
        raise NoCandidates("no scored candidate at any level")
    best_i, _ = max(candidates, key=lambda c: (c[1], -c[0]))
    second_i = None
    rest = [c for c in candidates if c[0] != best_i]
    if rest:
        second_i, _ = max(rest, key=lambda c: (c[1], -c[0]))
    out = [0.0] * len(sims)
    out[best_i] = values[0]
    if second_i is not None:
        out[second_i] = values[1]
    return SoftLabel(tuple(out), best_i + 1, None if second_i is None else second_i + 1)


@dataclass
class LabelRecord:
    """One line of the soft-label JSONL file."""

    qid: int
    embedding: list[float]
    soft_label: list[float]
    sims: list[float | None]
    method: str


def build_dataset(
    corpus_set,
    qa: list[QaExample],
    method: str,
    embedder: EmbedderConfig,
    values: tuple[float, float] = DEFAULT_LABEL_VALUES,
    threads: int = 1,
) -> tuple[list[TrainExample], list[LabelRecord]]:
    """One training example per QA pair that produced at least one candidate.

    Skipped examples are logged with the reason; output order always
    matches input order regardless of the worker count.
    """
    if method not in SIM_METHODS:
        raise ValueError(f"unknown similarity method {method!r}")
    idf = corpus_set.level1_index if method == TFIDF_COSINE else None

    def process(item: tuple[int, QaExample]):
        qid, example = item
        per_level = best_per_level(corpus_set, example.question)
        sims: list[float | None] = []
        for _, hit in per_level:
            if hit is None:
                sims.append(None)
                continue
            text = corpus_set.snippet(hit[0]).text
            sims.append(similarity(method, text, example.label_text, idf, embedder))
        if all(s is None for s in sims):
            return qid, None, sims
        label = build_soft_label(sims, values)
        e_q = embed_query(embedder, example.question)
        return qid, (e_q, label), sims

    items = list(enumerate(qa))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(process, items))
    else:
        outcomes = [process(item) for item in items]

    examples: list[TrainExample] = []
    records: list[LabelRecord] = []
    for qid, payload, sims in outcomes:
        if payload is None:
            log.info("skipping qa %d: no candidates at any level", qid)
            continue
        e_q, label = payload
        examples.append(TrainExample(e_q, label.as_array()))
        records.append(
            LabelRecord(qid, [float(v) for v in e_q], list(label.values), sims, method)
        )
    return examples, records


def save_labels(records: list[LabelRecord], path: str) -> None:
    lines = [
        json.dumps(
            {
                "qid": r.qid,
                "embedding": r.embedding,
                "soft_label": r.soft_label,
                "sims": r.sims,
                "method": r.method,
            },
            separators=(",", ":"),
        )
        for r in records
    ]
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    os.replace(tmp, path)


def load_labels(path: str) -> list[TrainExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    TrainExample(
                        np.asarray(obj["embedding"], dtype=float),
                        np.asarray(obj["soft_label"], dtype=float),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: bad label record: {exc}") from exc
    return examples


def load_qa(path: str) -> list[QaExample]:
    """Read a JSONL QA file: {"question", "answer", "snippet"? } per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(
                    QaExample(
                        str(obj["question"]),
                        str(obj["answer"]),
                        str(obj["snippet"]) if obj.get("snippet") else None,
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"{path}:{lineno}: bad QA record: {exc}") from exc
    return out
