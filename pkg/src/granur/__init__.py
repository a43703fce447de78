"""granur: multi-granularity BM25 retrieval with a trained granularity
router, soft-label supervision, and graph-neighborhood chunking.

The pieces compose bottom-up: ``corpus`` chunks documents into a pyramid
of granularity levels, ``index`` serves BM25 per level, ``embed`` turns
queries into vectors, ``router`` maps a query vector to per-level
weights, ``softlabel`` builds the router's training targets, ``selection``
fuses per-level hits into final snippets, ``graph`` swaps the pyramid for
hop-radius neighborhoods over a sentence graph, and ``evalharness`` /
``cli`` run experiments end to end.
"""

from .corpus import Chunk, ChunkPyramid, Document, build_pyramid, containing_chunk, split_sentences
from .embed import EmbedderConfig, embed_batch, embed_query, remote_config
from .errors import GranurError
from .graph import GraphCorpusSet, SnippetGraph, build_graph, build_nodes, hood
from .index import Bm25Index, CorpusSet, GranularityIndexSet, build_index, search
from .router import RouterModel, TrainConfig, TrainExample, bce_loss, forward, new_model, train
from .selection import Pipeline, SelectionResult, fuse_corpora, retrieve, select
from .softlabel import QaExample, SoftLabel, build_dataset, build_soft_label, similarity

__version__ = "0.1.0"

__all__ = [
    "Bm25Index",
    "Chunk",
    "ChunkPyramid",
    "CorpusSet",
    "Document",
    "EmbedderConfig",
    "GranularityIndexSet",
    "GranurError",
    "GraphCorpusSet",
    "Pipeline",
    "QaExample",
    "RouterModel",
    "SelectionResult",
    "SnippetGraph",
    "SoftLabel",
    "TrainConfig",
    "TrainExample",
    "bce_loss",
    "build_dataset",
    "build_graph",
    "build_index",
    "build_nodes",
    "build_pyramid",
    "build_soft_label",
    "containing_chunk",
    "embed_batch",
    "embed_query",
    "forward",
    "fuse_corpora",
    "hood",
    "new_model",
    "remote_config",
    "retrieve",
    "search",
    "select",
    "similarity",
    "split_sentences",
    "train",
]
