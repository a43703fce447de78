"""Command-line front end: build indexes and graphs, build soft labels,
train the router, retrieve, and evaluate.

Configuration comes from key=value config files with CLI-flag overrides
(flags win); GRANUR_EMBED_URL overrides the embedder endpoint. Exit
codes: 0 ok, 2 config error, 3 IO error, 4 remote-embedder error,
5 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

from . import evalharness, router as router_mod, selection, softlabel
from .corpus import load_corpus
from .embed import HASHED, REMOTE, EmbedderConfig
from .errors import ConfigError, DimMismatch, GranurError, RemoteUnavailable
from .graph import GraphCorpusSet
from .index import CorpusSet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_REMOTE = 4
EXIT_DATA = 5

ENV_EMBED_URL = "GRANUR_EMBED_URL"


@dataclass
class PipelineConfig:
    corpora: list[str] = field(default_factory=list)
    n_gra: int = 5
    base_size: int = 64
    k_r: int = 3
    k: int = 3
    k_final: int = 2
    embedder: str = HASHED
    dim: int = 256
    endpoint: str = ""
    timeout_ms: int = 10_000
    k1: float = 1.2
    b: float = 0.75
    mogg: bool = False
    k_graph: int = 3
    t_graph: float = 0.0
    sentences_per_node: int = 2
    seed: int = 0
    threads: int = 1
    eq2_literal: bool = False

    def validate(self) -> None:
        positive = ("n_gra", "base_size", "k_r", "k", "k_final", "k_graph", "threads")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.embedder not in (HASHED, REMOTE):
            raise ConfigError(f"embedder must be {HASHED} or {REMOTE}, got {self.embedder!r}")
        if self.embedder == REMOTE and not self.endpoint:
            raise ConfigError("remote embedder needs endpoint (flag, config, or GRANUR_EMBED_URL)")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.sentences_per_node not in (1, 2):
            raise ConfigError(f"sentences_per_node must be 1 or 2, got {self.sentences_per_node}")

    def embedder_config(self) -> EmbedderConfig:
        return EmbedderConfig(
            kind=self.embedder,
            dim=self.dim,
            endpoint=self.endpoint,
            timeout_ms=self.timeout_ms,
        )


_FIELD_PARSERS = {
    "corpora": lambda v: [p.strip() for p in v.split(",") if p.strip()],
    "n_gra": int,
    "base_size": int,
    "k_r": int,
    "k": int,
    "k_final": int,
    "embedder": str,
    "dim": int,
    "endpoint": str,
    "timeout_ms": int,
    "k1": float,
    "b": float,
    "mogg": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "k_graph": int,
    "t_graph": float,
    "sentences_per_node": int,
    "seed": int,
    "threads": int,
    "eq2_literal": lambda v: v.lower() in ("1", "true", "yes", "on"),
}


def load_config_file(path: str) -> dict:
    """Parse a key=value config file; errors carry the offending line number."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults < config file < GRANUR_EMBED_URL < explicit flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(cfg, key, value)
    env_url = os.environ.get(ENV_EMBED_URL)
    if env_url:
        cfg.endpoint = env_url
    for field_ in dataclasses.fields(PipelineConfig):
        flag_value = getattr(args, field_.name, None)
        if flag_value is not None:
            setattr(cfg, field_.name, flag_value)
    if cfg.embedder == REMOTE and cfg.dim == 256 and "dim" not in _explicit(args):
        cfg.dim = 768  # RoBERTa-class default for the remote service
    cfg.validate()
    return cfg


def _explicit(args: argparse.Namespace) -> set[str]:
    return {k for k, v in vars(args).items() if v is not None}


def _corpus_name(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _build_set(cfg: PipelineConfig, path: str, graph_mode: bool):
    docs = load_corpus(path)
    name = _corpus_name(path)
    if graph_mode:
        return GraphCorpusSet.build(
            docs,
            n_gra=cfg.n_gra,
            k_graph=cfg.k_graph,
            t_graph=cfg.t_graph,
            sentences_per_node=cfg.sentences_per_node,
            k1=cfg.k1,
            b=cfg.b,
            name=name,
        )
    return CorpusSet.build(
        docs, n_gra=cfg.n_gra, base_size=cfg.base_size, k1=cfg.k1, b=cfg.b, name=name
    )


def load_corpus_sets(dir_path: str) -> dict[str, object]:
    """Load every saved corpus set under ``dir_path`` (or the dir itself)."""
    if os.path.exists(os.path.join(dir_path, "meta.json")):
        corpus_set = _load_one(dir_path)
        return {corpus_set.name: corpus_set}
    sets = {}
    for entry in sorted(os.listdir(dir_path)):
        sub = os.path.join(dir_path, entry)
        if os.path.isdir(sub) and os.path.exists(os.path.join(sub, "meta.json")):
            corpus_set = _load_one(sub)
            sets[corpus_set.name] = corpus_set
    if not sets:
        raise ConfigError(f"{dir_path}: no corpus sets found (missing meta.json)")
    return sets


def _load_one(dir_path: str):
    with open(os.path.join(dir_path, "meta.json"), encoding="utf-8") as fh:
        kind = json.load(fh).get("kind")
    if kind == GraphCorpusSet.kind:
        return GraphCorpusSet.load(dir_path)
    return CorpusSet.load(dir_path)


def _require_corpora(cfg: PipelineConfig) -> list[str]:
    if not cfg.corpora:
        raise ConfigError("no corpora given (use --corpus or corpora= in the config file)")
    return cfg.corpora


def cmd_build_index(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    for path in _require_corpora(cfg):
        corpus_set = _build_set(cfg, path, graph_mode=cfg.mogg)
        out = os.path.join(args.out, corpus_set.name)
        corpus_set.save(out)
        print(f"built {corpus_set.kind} index set {corpus_set.name!r} "
              f"({corpus_set.n_gra} levels) -> {out}")
    return EXIT_OK


def cmd_build_graph(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    for path in _require_corpora(cfg):
        corpus_set = _build_set(cfg, path, graph_mode=True)
        out = os.path.join(args.out, corpus_set.name)
        corpus_set.save(out)
        n_edges = sum(len(adj) for adj in corpus_set.graph.adjacency) // 2
        print(f"built graph {corpus_set.name!r}: {len(corpus_set.graph.nodes)} nodes, "
              f"{n_edges} edges -> {out}")
    return EXIT_OK


def _single_corpus_set(cfg: PipelineConfig, args: argparse.Namespace):
    if getattr(args, "index_dir", None):
        sets = load_corpus_sets(args.index_dir)
        if getattr(args, "corpus_name", None):
            if args.corpus_name not in sets:
                raise ConfigError(f"corpus {args.corpus_name!r} not in {sorted(sets)}")
            return sets[args.corpus_name]
        if len(sets) != 1:
            raise ConfigError(f"multiple corpora in {args.index_dir}: give --corpus-name")
        return next(iter(sets.values()))
    paths = _require_corpora(cfg)
    if len(paths) != 1:
        raise ConfigError("build-labels needs exactly one corpus (or --index-dir)")
    return _build_set(cfg, paths[0], graph_mode=cfg.mogg)


def cmd_build_labels(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    corpus_set = _single_corpus_set(cfg, args)
    qa = softlabel.load_qa(args.qa)
    _, records = softlabel.build_dataset(
        corpus_set, qa, args.method, cfg.embedder_config(), threads=cfg.threads
    )
    softlabel.save_labels(records, args.out)
    print(f"wrote {len(records)} soft-label records ({len(qa) - len(records)} skipped) "
          f"-> {args.out}")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    examples = softlabel.load_labels(args.labels)
    if not examples:
        raise ConfigError(f"{args.labels}: no training examples")
    input_dim = len(examples[0].embedding)
    n_gra = len(examples[0].soft_label)
    model = router_mod.new_model(input_dim, n_gra, seed=cfg.seed)
    train_cfg = router_mod.TrainConfig(
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        seed=cfg.seed,
        early_stop_patience=args.patience,
    )
    model, history = router_mod.train(model, examples, train_cfg)
    router_mod.save_model(model, args.out)
    if args.loss_csv:
        lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(history, 1)]
        _atomic_text(args.loss_csv, "\n".join(lines) + "\n")
    print(f"trained {len(history)} epochs, final loss {history[-1]:.6f} -> {args.out}")
    return EXIT_OK


def _pipeline(cfg: PipelineConfig, args: argparse.Namespace) -> selection.Pipeline:
    corpora = load_corpus_sets(args.corpus_dir)
    model = router_mod.load_model(args.router)
    return selection.Pipeline(
        corpora,
        model,
        cfg.embedder_config(),
        k_r=cfg.k_r,
        k=cfg.k,
        k_final=cfg.k_final,
        eq2_literal=cfg.eq2_literal,
    )


def cmd_retrieve(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    pipeline = _pipeline(cfg, args)
    fused = pipeline.run(args.query)
    results = [evalharness.result_dict(cid, res) for cid, res in fused]
    print(json.dumps(results, indent=2))
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    pipeline = _pipeline(cfg, args)
    qa = softlabel.load_qa(args.qa)
    metrics, run = evalharness.eval_retrieval(pipeline, qa, threads=cfg.threads)
    evalharness.save_run(run, args.out)
    _atomic_text(args.csv, evalharness.metrics_csv(metrics))
    print(f"hitrate@{pipeline.k_final}={metrics.hitrate_at_k:.4f} mrr={metrics.mrr:.4f} "
          f"({len(qa)} queries) -> {args.out}, {args.csv}")
    return EXIT_OK


def _atomic_text(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--corpus", action="append", dest="corpora", metavar="JSONL",
                        help="corpus file (repeatable)")
    parser.add_argument("--n-gra", type=int, dest="n_gra")
    parser.add_argument("--base-size", type=int, dest="base_size")
    parser.add_argument("--k-r", type=int, dest="k_r")
    parser.add_argument("--k", type=int, dest="k")
    parser.add_argument("--k-final", type=int, dest="k_final")
    parser.add_argument("--embedder", choices=(HASHED, REMOTE))
    parser.add_argument("--dim", type=int)
    parser.add_argument("--endpoint")
    parser.add_argument("--timeout-ms", type=int, dest="timeout_ms")
    parser.add_argument("--k1", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--mogg", action="store_const", const=True)
    parser.add_argument("--k-graph", type=int, dest="k_graph")
    parser.add_argument("--t-graph", type=float, dest="t_graph")
    parser.add_argument("--sentences-per-node", type=int, dest="sentences_per_node")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--eq2-literal", action="store_const", const=True, dest="eq2_literal")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="granur",
        description="Multi-granularity BM25 retrieval with a trained granularity router",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="chunk corpora and build per-level BM25 indexes")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("build-graph", help="build sentence-node graphs and hop-level indexes")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("build-labels", help="build soft-label training data from QA pairs")
    _add_common(p)
    p.add_argument("--qa", required=True, help="QA JSONL file")
    p.add_argument("--method", required=True, choices=softlabel.SIM_METHODS)
    p.add_argument("--out", required=True, help="output labels JSONL")
    p.add_argument("--index-dir", help="directory of saved corpus sets")
    p.add_argument("--corpus-name", help="which corpus set to use from --index-dir")
    p.set_defaults(func=cmd_build_labels)

    p = sub.add_parser("train", help="train the router on soft labels")
    _add_common(p)
    p.add_argument("--labels", required=True, help="labels JSONL from build-labels")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv", help="per-epoch loss CSV path")
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrieve", help="retrieve snippets for one query")
    _add_common(p)
    p.add_argument("--query", required=True)
    p.add_argument("--router", required=True, help="router checkpoint")
    p.add_argument("--corpus-dir", required=True, help="directory of saved corpus sets")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("eval", help="run retrieval metrics over a QA file")
    _add_common(p)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True, help="run JSON path")
    p.add_argument("--csv", required=True, help="metrics CSV path")
    p.add_argument("--router", required=True)
    p.add_argument("--corpus-dir", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RemoteUnavailable, DimMismatch) as exc:
        print(f"remote embedder error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except GranurError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
