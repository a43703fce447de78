"""The two-step selection rule on a real corpus: per-level BM25 hits are
spread onto finest chunks, fused with a weight vector, and the winning
finest chunk is expanded to its best-weighted retrieved container.

Run from the repository root:  python demos/02_weighted_selection.py
"""

from pathlib import Path

import numpy as np

from granur.corpus import load_corpus
from granur.index import CorpusSet
from granur.selection import build_relevance_matrix, select

DATA = Path(__file__).parent / "data" / "wildlife.jsonl"
QUERY = "salmon spawn upstream"


def main():
    corpus_set = CorpusSet.build(load_corpus(str(DATA)), n_gra=5, base_size=8)
    hits = corpus_set.search_all_levels(QUERY, k_r=3)

    print(f"query: {QUERY!r}")
    print("\nper-level BM25 candidates (top score each):")
    for level, level_hits in enumerate(hits, 1):
        if level_hits:
            (doc, _, ordinal), score = level_hits[0]
            print(f"  level {level}: {len(level_hits)} hits, best {score:.3f} "
                  f"({doc} chunk {ordinal})")
        else:
            print(f"  level {level}: no hits")

    matrix = build_relevance_matrix(corpus_set, hits)
    print(f"\nrelevance matrix: {len(matrix.rows)} finest chunks touched")
    sample_key = max(matrix.rows, key=lambda k: matrix.rows[k].scores.sum())
    print(f"  densest row {sample_key}: {np.round(matrix.rows[sample_key].scores, 3)}")

    for style, w in [
        ("coarse-leaning", np.array([0.05, 0.10, 0.20, 0.60, 0.80])),
        ("fine-leaning", np.array([0.80, 0.60, 0.20, 0.10, 0.05])),
    ]:
        results = select(matrix, w, k=1)
        top = results[0]
        text = top.snippet.text if len(top.snippet.text) < 90 else top.snippet.text[:87] + "..."
        print(f"\n{style} weights {np.round(w, 2)}:")
        print(f"  chunk_r={top.chunk_r}  container level={top.g_r}  "
              f"fused={top.fused_score:.3f}")
        print(f"  snippet: {text!r}")


if __name__ == "__main__":
    main()
