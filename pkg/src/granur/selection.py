"""Weighted fusion of per-level BM25 hits over finest-chunk identities.

Raw BM25 scores are never compared across granularity levels: each finest
chunk accumulates a score vector (one slot per level, zero where it was
not retrieved), and ranking happens only on the dot product of that
vector with the router's weight vector. The winning finest chunk is then
expanded to its retrieved container at the level the router weights
highest among the levels that actually retrieved it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import router as router_mod
from .embed import EmbedderConfig, embed_query
from .errors import EmptyMatrix
from .index import ChunkId

FinestKey = tuple[str, int]  # (doc_id, finest ordinal / node id)

DEFAULT_K_R = 3
DEFAULT_K = 3
DEFAULT_K_FINAL = 2


@dataclass
class _Row:
    scores: np.ndarray
    sources: list[ChunkId | None]


@dataclass
class RelevanceMatrix:
    """Per-finest-chunk score vectors plus the hit that produced each entry."""

    corpus_set: Any
    rows: dict[FinestKey, _Row] = field(default_factory=dict)

    @property
    def n_gra(self) -> int:
        return self.corpus_set.n_gra


def build_relevance_matrix(
    corpus_set, per_level_hits: list[list[tuple[ChunkId, float]]]
) -> RelevanceMatrix:
    """Spread each level's hits onto the finest chunks they contain.

    A finest chunk covered by several hits at the same level keeps the
    maximum score; zero-score hits are indistinguishable from padding and
    are skipped.
    """
    matrix = RelevanceMatrix(corpus_set)
    n_gra = corpus_set.n_gra
    for level, hits in enumerate(per_level_hits, 1):
        for chunk_id, score in hits:
            if score == 0.0:
                continue
            for finest_key in corpus_set.covered_finest(chunk_id):
                row = matrix.rows.get(finest_key)
                if row is None:
                    row = _Row(np.zeros(n_gra), [None] * n_gra)
                    matrix.rows[finest_key] = row
                if score > row.scores[level - 1]:
                    row.scores[level - 1] = score
                    row.sources[level - 1] = chunk_id
    return matrix


@dataclass
class SelectionResult:
    chunk_r: FinestKey
    g_r: int
    snippet: Any  # Chunk or HoodChunk: anything with .doc_id/.level/.ordinal/.text
    fused_score: float


def select(
    matrix: RelevanceMatrix, w: np.ndarray, k: int, eq2_literal: bool = False
) -> list[SelectionResult]:
    """Top-``k`` finest chunks by fused score, expanded to their containers.

    Ranking key is the dot product scores . w, ties broken by ascending
    (doc_id, ordinal). The container level is the argmax of w restricted
    to levels where the chunk was retrieved (ties toward the finer level);
    ``eq2_literal`` instead takes the unrestricted argmax of w and expands
    through structural containment.
    """
    if not matrix.rows:
        raise EmptyMatrix("no retrieved chunks to select from")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    w = np.asarray(w, dtype=float)
    ranked = sorted(
        matrix.rows.items(), key=lambda item: (-float(item[1].scores @ w), item[0])
    )
    results = []
    for finest_key, row in ranked[:k]:
        if eq2_literal:
            g_r = int(np.argmax(w)) + 1
            snippet = matrix.corpus_set.container(finest_key, g_r)
        else:
            levels = np.flatnonzero(row.scores)
            g_r = int(levels[np.argmax(w[levels])]) + 1
            snippet = matrix.corpus_set.snippet(row.sources[g_r - 1])
        results.append(
            SelectionResult(finest_key, g_r, snippet, float(row.scores @ w))
        )
    return results


def retrieve(
    corpus_set,
    router: router_mod.RouterModel,
    embedder: EmbedderConfig,
    query: str,
    k_r: int = DEFAULT_K_R,
    k: int = DEFAULT_K,
    eq2_literal: bool = False,
) -> list[SelectionResult]:
    """Embed, route, search every level, fuse, and select for one corpus."""
    e_q = embed_query(embedder, query)
    w = router_mod.forward(router, e_q)
    hits = corpus_set.search_all_levels(query, k_r)
    matrix = build_relevance_matrix(corpus_set, hits)
    if not matrix.rows:
        return []
    return select(matrix, w, k, eq2_literal)


def fuse_corpora(
    per_corpus: list[tuple[str, list[SelectionResult]]], k_final: int = DEFAULT_K_FINAL
) -> list[tuple[str, SelectionResult]]:
    """Global top-``k_final`` across corpora by fused score."""
    if k_final < 1:
        raise ValueError(f"k_final must be >= 1, got {k_final}")
    flat = [(cid, res) for cid, results in per_corpus for res in results]
    flat.sort(key=lambda item: (-item[1].fused_score, item[0], item[1].chunk_r))
    return flat[:k_final]


def assemble_context(
    fused: list[tuple[str, SelectionResult]], max_chars: int
) -> str:
    """Rank-ordered snippets with source prefixes, cut at a whitespace boundary."""
    if max_chars < 1:
        raise ValueError(f"max_chars must be >= 1, got {max_chars}")
    parts = [
        f"[source: {cid}/{res.snippet.doc_id}/{res.g_r}] {res.snippet.text}"
        for cid, res in fused
    ]
    context = "\n\n".join(parts)
    if len(context) <= max_chars:
        return context
    cut = context.rfind(" ", 0, max_chars + 1)
    for candidate in ("\n", "\t"):
        cut = max(cut, context.rfind(candidate, 0, max_chars + 1))
    if cut <= 0:
        return context[:max_chars]
    return context[:cut].rstrip()


@dataclass
class Pipeline:
    """End-to-end retrieval over one or more corpora with a shared router."""

    corpora: dict[str, Any]
    router: router_mod.RouterModel
    embedder: EmbedderConfig
    k_r: int = DEFAULT_K_R
    k: int = DEFAULT_K
    k_final: int = DEFAULT_K_FINAL
    eq2_literal: bool = False

    def run(self, query: str) -> list[tuple[str, SelectionResult]]:
        per_corpus = [
            (name, retrieve(cs, self.router, self.embedder, query, self.k_r, self.k, self.eq2_literal))
            for name, cs in sorted(self.corpora.items())
        ]
        return fuse_corpora(per_corpus, self.k_final)

    def run_timed(self, query: str) -> tuple[list[tuple[str, SelectionResult]], float]:
        start = time.perf_counter()
        results = self.run(query)
        return results, (time.perf_counter() - start) * 1000.0

    def with_levels(self, n_levels: int) -> "Pipeline":
        """Same corpora truncated to ``n_levels`` levels, fresh seeded router."""
        corpora = {name: cs.with_levels(n_levels) for name, cs in self.corpora.items()}
        fresh = router_mod.new_model(
            self.router.input_dim, n_levels, seed=self.router.seed
        )
        return Pipeline(
            corpora, fresh, self.embedder, self.k_r, self.k, self.k_final, self.eq2_literal
        )
