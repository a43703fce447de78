"""Supervise the granularity router end to end: per-level best snippets
are scored against each QA label, turned into 0.8/0.2/0 soft labels, and
the router learns which granularity to weight for which question.

Run from the repository root:  python demos/03_train_router.py
"""

from pathlib import Path

import numpy as np

from granur.corpus import load_corpus
from granur.embed import EmbedderConfig, embed_query
from granur.evalharness import eval_retrieval, weight_report
from granur.index import CorpusSet
from granur.router import TrainConfig, forward, new_model, train
from granur.selection import Pipeline
from granur.softlabel import build_dataset, load_qa

DATA = Path(__file__).parent / "data"


def main():
    corpus_set = CorpusSet.build(
        load_corpus(str(DATA / "wildlife.jsonl")), n_gra=5, base_size=8, name="wildlife"
    )
    qa = load_qa(str(DATA / "qa.jsonl"))
    embedder = EmbedderConfig(dim=256)

    examples, records = build_dataset(corpus_set, qa, "tfidf_cosine", embedder)
    print(f"built {len(examples)} soft-label examples from {len(qa)} QA pairs")
    print("first three label rows (sims -> soft label):")
    for record in records[:3]:
        sims = [None if s is None else round(s, 3) for s in record.sims]
        print(f"  {sims} -> {record.soft_label}")

    model = new_model(embedder.dim, corpus_set.n_gra, seed=0)
    cfg = TrainConfig(max_epochs=400, batch_size=4, seed=0, early_stop_patience=30)
    model, history = train(model, examples, cfg)
    print(f"\ntrained {len(history)} epochs; "
          f"loss {history[0]:.4f} -> {history[-1]:.4f}")

    sample = qa[0].question
    w = forward(model, embed_query(embedder, sample))
    print(f"\nrouter weights for {sample!r}: {np.round(w, 3)}")

    means, _ = weight_report(model, embedder, qa)
    print(f"mean weight per level over the QA set: {np.round(means, 3)}")

    pipeline = Pipeline({"wildlife": corpus_set}, model, embedder)
    metrics, _ = eval_retrieval(pipeline, qa, k_final=2)
    print(f"\nretrieval metrics: hitrate@2={metrics.hitrate_at_k:.2f} "
          f"mrr={metrics.mrr:.2f}")


if __name__ == "__main__":
    main()
