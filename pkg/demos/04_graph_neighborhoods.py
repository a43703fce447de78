"""Reorganize a corpus as a sentence graph: BM25-kNN edges connect
related sentences across documents, and granularity becomes hop radius.
A snippet's neighborhood can then span documents, which linear windows
never can.

Run from the repository root:  python demos/04_graph_neighborhoods.py
"""

from pathlib import Path

from granur.corpus import load_corpus
from granur.embed import EmbedderConfig
from granur.graph import GraphCorpusSet, hood
from granur.router import new_model
from granur.selection import retrieve

DATA = Path(__file__).parent / "data" / "wildlife.jsonl"


def main():
    docs = load_corpus(str(DATA))
    corpus_set = GraphCorpusSet.build(
        docs, n_gra=4, k_graph=3, t_graph=0.0, sentences_per_node=1
    )
    graph = corpus_set.graph
    n_edges = sum(len(adj) for adj in graph.adjacency) // 2
    print(f"{len(graph.nodes)} sentence nodes, {n_edges} undirected kNN edges")

    cross = [
        (u, v)
        for u, adj in enumerate(graph.adjacency)
        for v in adj
        if u < v and graph.nodes[u].doc_id != graph.nodes[v].doc_id
    ]
    print(f"{len(cross)} edges cross document boundaries; one example:")
    u, v = cross[0]
    print(f"  [{graph.nodes[u].doc_id}] {graph.nodes[u].text!r}")
    print(f"  [{graph.nodes[v].doc_id}] {graph.nodes[v].text!r}")

    center = u
    print(f"\nneighborhood growth around node {center}:")
    for hop_radius in range(3):
        ball = hood(graph, center, hop_radius)
        doc_ids = sorted({graph.nodes[n].doc_id for n in ball.member_nodes})
        print(f"  hops={hop_radius}: {len(ball.member_nodes):2d} nodes "
              f"from documents {doc_ids}")

    model = new_model(128, corpus_set.n_gra, seed=0)
    results = retrieve(
        corpus_set, model, EmbedderConfig(dim=128), "bears catch salmon", k_r=3, k=2
    )
    print("\ngraph-backed retrieval for 'bears catch salmon':")
    for res in results:
        text = res.snippet.text if len(res.snippet.text) < 90 else res.snippet.text[:87] + "..."
        print(f"  winning node {res.chunk_r[1]} -> hop level {res.g_r}, "
              f"members {res.snippet.member_nodes}: {text!r}")


if __name__ == "__main__":
    main()
