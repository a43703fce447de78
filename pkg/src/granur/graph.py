"""Graph-backed corpora: sentence nodes, BM25-kNN edges, and granularity
levels redefined as hop-radius neighborhoods around each node.

The selection module runs unmodified on these: a node id plays the finest
chunk ordinal's role, and a level-g "chunk" is the deduplicated BFS ball
of radius g-1 around a center node.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .corpus import Document, split_sentences, tokenize
from .errors import CorpusFormatError, EmptyCorpus, InconsistentPyramid, OutOfRange
from .index import (
    DEFAULT_B,
    DEFAULT_K1,
    Bm25Index,
    ChunkId,
    GranularityIndexSet,
    build_index,
    load_index,
    save_index,
    search,
    search_all_levels,
)

DEFAULT_K_GRAPH = 3
DEFAULT_T_GRAPH = 0.0
DEFAULT_SENTENCES_PER_NODE = 2


@dataclass(frozen=True)
class SnippetNode:
    """One or two consecutive sentences of a document; ids are dense 0..N-1."""

    node_id: int
    doc_id: str
    text: str
    token_count: int

    # Index/selection plumbing treats a node as a level-1 chunk.
    @property
    def chunk_id(self) -> ChunkId:
        return (self.doc_id, 1, self.node_id)

    @property
    def level(self) -> int:
        return 1

    @property
    def ordinal(self) -> int:
        return self.node_id


@dataclass
class SnippetGraph:
    """Undirected kNN graph over snippet nodes; adjacency lists sorted, no loops."""

    nodes: list[SnippetNode]
    adjacency: list[list[int]]
    k_graph: int
    t_graph: float


def build_nodes(
    docs: list[Document], sentences_per_node: int = DEFAULT_SENTENCES_PER_NODE
) -> list[SnippetNode]:
    """Window each document's sentences into nodes, in document order."""
    if sentences_per_node not in (1, 2):
        raise ValueError(f"sentences_per_node must be 1 or 2, got {sentences_per_node}")
    if not docs:
        raise EmptyCorpus("no documents to build nodes from")
    nodes = []
    for doc in docs:
        sentences = split_sentences(doc.text)
        for i in range(0, len(sentences), sentences_per_node):
            text = " ".join(sentences[i : i + sentences_per_node])
            token_count = len(tokenize(text))
            if token_count == 0:  # pure punctuation cannot be indexed
                continue
            nodes.append(SnippetNode(len(nodes), doc.doc_id, text, token_count))
    if not nodes:
        raise EmptyCorpus("documents produced no sentence nodes")
    return nodes


def build_graph(
    nodes: list[SnippetNode],
    k_graph: int = DEFAULT_K_GRAPH,
    t_graph: float = DEFAULT_T_GRAPH,
) -> SnippetGraph:
    """kNN edges: each node queries the node index with its own text.

    The top ``k_graph`` neighbors (self excluded) whose BM25 score meets
    ``t_graph`` become edge proposals; the union of proposals is the
    undirected edge set.
    """
    if k_graph < 1:
        raise ValueError(f"k_graph must be >= 1, got {k_graph}")
    index = build_index(nodes)
    neighbor_sets: list[set[int]] = [set() for _ in nodes]
    for node in nodes:
        hits = search(index, node.text, k_graph + 1)
        proposals = [
            (cid[2], score) for cid, score in hits if cid[2] != node.node_id
        ][:k_graph]
        for other, score in proposals:
            if score >= t_graph:
                neighbor_sets[node.node_id].add(other)
                neighbor_sets[other].add(node.node_id)
    adjacency = [sorted(s) for s in neighbor_sets]
    return SnippetGraph(nodes, adjacency, k_graph, t_graph)


@dataclass(frozen=True)
class HoodChunk:
    """The radius-``hop`` neighborhood of a center node, each member once,
    ordered by (BFS depth, node_id); its text is the space-join of members.
    """

    center: int
    hop: int
    member_nodes: tuple[int, ...]
    text: str
    doc_id: str

    @property
    def level(self) -> int:
        return self.hop + 1

    @property
    def ordinal(self) -> int:
        return self.center

    @property
    def chunk_id(self) -> ChunkId:
        return (self.doc_id, self.level, self.center)


def hood(graph: SnippetGraph, center: int, hop: int) -> HoodChunk:
    """Level-synchronous BFS ball of radius ``hop`` around ``center``;
    each member appears once, in (depth, node_id) order.
    """
    if hop < 0:
        raise OutOfRange(f"hop must be >= 0, got {hop}")
    if not 0 <= center < len(graph.nodes):
        raise OutOfRange(f"node id {center} outside [0, {len(graph.nodes)})")
    members = [center]
    seen = {center}
    frontier = [center]
    for _ in range(hop):
        ring = sorted(
            {nb for node in frontier for nb in graph.adjacency[node]} - seen
        )
        if not ring:
            break
        seen.update(ring)
        members.extend(ring)
        frontier = ring
    text = " ".join(graph.nodes[n].text for n in members)
    return HoodChunk(center, hop, tuple(members), text, graph.nodes[center].doc_id)


class GraphCorpusSet:
    """Graph-backed analogue of CorpusSet: level g indexes the hop-(g-1)
    neighborhood of every node; node ids are the finest identities.
    """

    kind = "graph"

    def __init__(
        self,
        graph: SnippetGraph,
        hoods: list[list[HoodChunk]],
        index_set: GranularityIndexSet,
        name: str = "corpus",
        sentences_per_node: int = DEFAULT_SENTENCES_PER_NODE,
    ):
        self.graph = graph
        self.hoods = hoods  # hoods[level-1][node_id]
        self.index_set = index_set
        self.name = name
        self.sentences_per_node = sentences_per_node

    @classmethod
    def build(
        cls,
        docs: list[Document],
        n_gra: int = 5,
        k_graph: int = DEFAULT_K_GRAPH,
        t_graph: float = DEFAULT_T_GRAPH,
        sentences_per_node: int = DEFAULT_SENTENCES_PER_NODE,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        name: str = "corpus",
    ) -> "GraphCorpusSet":
        nodes = build_nodes(docs, sentences_per_node)
        graph = build_graph(nodes, k_graph, t_graph)
        return cls.from_graph(graph, n_gra, k1, b, name, sentences_per_node)

    @classmethod
    def from_graph(
        cls,
        graph: SnippetGraph,
        n_gra: int,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        name: str = "corpus",
        sentences_per_node: int = DEFAULT_SENTENCES_PER_NODE,
    ) -> "GraphCorpusSet":
        if n_gra < 1:
            raise ValueError(f"n_gra must be >= 1, got {n_gra}")
        hoods = [
            [hood(graph, node.node_id, level - 1) for node in graph.nodes]
            for level in range(1, n_gra + 1)
        ]
        per_level = [build_index(level_hoods, k1, b) for level_hoods in hoods]
        return cls(graph, hoods, GranularityIndexSet(per_level), name, sentences_per_node)

    @property
    def n_gra(self) -> int:
        return self.index_set.n_gra

    @property
    def level1_index(self) -> Bm25Index:
        return self.index_set.per_level[0]

    def search_all_levels(self, query: str, k_r: int) -> list[list[tuple[ChunkId, float]]]:
        return search_all_levels(self.index_set, query, k_r)

    def snippet(self, chunk_id: ChunkId) -> HoodChunk:
        _, level, center = chunk_id
        try:
            found = self.hoods[level - 1][center]
        except IndexError as exc:
            raise InconsistentPyramid(f"unknown hood {chunk_id!r}") from exc
        if found.chunk_id != chunk_id:
            raise InconsistentPyramid(f"unknown hood {chunk_id!r}")
        return found

    def covered_finest(self, chunk_id: ChunkId) -> list[tuple[str, int]]:
        return [
            (self.graph.nodes[n].doc_id, n) for n in self.snippet(chunk_id).member_nodes
        ]

    def container(self, finest_key: tuple[str, int], level: int) -> HoodChunk:
        _, node_id = finest_key
        if not 0 <= node_id < len(self.graph.nodes):
            raise InconsistentPyramid(f"unknown node {finest_key!r}")
        return self.hoods[level - 1][node_id]

    def with_levels(self, n_levels: int) -> "GraphCorpusSet":
        if not 1 <= n_levels <= self.n_gra:
            raise ValueError(f"n_levels must be in [1, {self.n_gra}]")
        return GraphCorpusSet(
            self.graph,
            self.hoods[:n_levels],
            GranularityIndexSet(self.index_set.per_level[:n_levels]),
            self.name,
            self.sentences_per_node,
        )

    def save(self, dir_path: str) -> None:
        """meta.json + graph.jsonl + level_N index directories."""
        os.makedirs(dir_path, exist_ok=True)
        meta = {
            "b": self.level1_index.b,
            "k1": self.level1_index.k1,
            "kind": self.kind,
            "n_gra": self.n_gra,
            "name": self.name,
            "sentences_per_node": self.sentences_per_node,
        }
        _write(os.path.join(dir_path, "meta.json"),
               json.dumps(meta, sort_keys=True, separators=(",", ":")))
        save_graph(self.graph, os.path.join(dir_path, "graph.jsonl"))
        for level, index in enumerate(self.index_set.per_level, 1):
            save_index(index, os.path.join(dir_path, f"level_{level}"))

    @classmethod
    def load(cls, dir_path: str) -> "GraphCorpusSet":
        with open(os.path.join(dir_path, "meta.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        if meta.get("kind") != cls.kind:
            raise CorpusFormatError(f"{dir_path}: not a graph corpus directory")
        graph = load_graph(os.path.join(dir_path, "graph.jsonl"))
        n_gra = int(meta["n_gra"])
        hoods = [
            [hood(graph, node.node_id, level - 1) for node in graph.nodes]
            for level in range(1, n_gra + 1)
        ]
        per_level = [
            load_index(os.path.join(dir_path, f"level_{level}"))
            for level in range(1, n_gra + 1)
        ]
        return cls(
            graph,
            hoods,
            GranularityIndexSet(per_level),
            str(meta["name"]),
            int(meta.get("sentences_per_node", DEFAULT_SENTENCES_PER_NODE)),
        )


def save_graph(graph: SnippetGraph, path: str) -> None:
    """JSONL: a header line, then one {"id","doc","text","adj"} line per node."""
    lines = [
        json.dumps(
            {"n_nodes": len(graph.nodes), "k_graph": graph.k_graph, "t_graph": graph.t_graph},
            separators=(",", ":"),
        )
    ]
    for node in graph.nodes:
        lines.append(
            json.dumps(
                {
                    "id": node.node_id,
                    "doc": node.doc_id,
                    "text": node.text,
                    "adj": graph.adjacency[node.node_id],
                },
                separators=(",", ":"),
            )
        )
    _write(path, "\n".join(lines) + "\n")


def load_graph(path: str) -> SnippetGraph:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise CorpusFormatError(f"{path}: empty graph file")
    try:
        header = json.loads(lines[0])
        n_nodes = int(header["n_nodes"])
        nodes, adjacency = [], []
        for line in lines[1:]:
            obj = json.loads(line)
            text = str(obj["text"])
            nodes.append(
                SnippetNode(int(obj["id"]), str(obj["doc"]), text, len(tokenize(text)))
            )
            adjacency.append([int(n) for n in obj["adj"]])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"{path}: malformed graph file: {exc}") from exc
    if len(nodes) != n_nodes or [n.node_id for n in nodes] != list(range(n_nodes)):
        raise CorpusFormatError(f"{path}: node ids are not dense 0..{n_nodes - 1}")
    return SnippetGraph(nodes, adjacency, int(header["k_graph"]), float(header["t_graph"]))


def _write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)
