"""Desk-scale experiment harness: retrieval metrics, router weight
reports, candidate-count sweeps, and level-count timing runs.

Answer containment stands in for end-task accuracy: a query counts as hit
when some returned snippet contains the gold answer's token sequence.
All aggregates are recomputable from the per-query records.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import router as router_mod
from .corpus import tokenize
from .embed import EmbedderConfig, embed_query
from .selection import Pipeline
from .softlabel import QaExample

RUN_SCHEMA_VERSION = 1


def contains_answer(text: str, answer: str) -> bool:
    """True when the answer's tokens appear contiguously in the text's tokens."""
    needle = tokenize(answer)
    if not needle:
        return False
    hay = tokenize(text)
    span = len(needle)
    return any(hay[i : i + span] == needle for i in range(len(hay) - span + 1))


@dataclass
class QueryRecord:
    query: str
    gold: str
    weights: list[float]
    results: list[dict]
    hit_rank: int | None
    latency_ms: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Metrics:
    hitrate_at_k: float
    mrr: float
    mean_weight_per_level: list[float]
    p50_latency_ms: float
    p95_latency_ms: float


@dataclass
class EvalRun:
    config: dict
    records: list[QueryRecord] = field(default_factory=list)

    def aggregate(self) -> Metrics:
        """Recompute every aggregate from the per-query records."""
        n = len(self.records)
        if n == 0:
            return Metrics(0.0, 0.0, [], 0.0, 0.0)
        hits = sum(1 for r in self.records if r.hit_rank is not None)
        mrr = sum(1.0 / r.hit_rank for r in self.records if r.hit_rank is not None) / n
        weights = np.mean([r.weights for r in self.records], axis=0)
        latencies = sorted(r.latency_ms for r in self.records)
        return Metrics(
            hitrate_at_k=hits / n,
            mrr=mrr,
            mean_weight_per_level=[float(v) for v in weights],
            p50_latency_ms=_percentile(latencies, 50.0),
            p95_latency_ms=_percentile(latencies, 95.0),
        )

    def as_dict(self) -> dict:
        metrics = self.aggregate()
        return {
            "v": RUN_SCHEMA_VERSION,
            "config": self.config,
            "records": [r.as_dict() for r in self.records],
            "aggregates": dataclasses.asdict(metrics),
        }


def _percentile(sorted_values: list[float], pct: float) -> float:
    if not sorted_values:
        return 0.0
    rank = (pct / 100.0) * (len(sorted_values) - 1)
    lo = int(rank)
    hi = min(lo + 1, len(sorted_values) - 1)
    frac = rank - lo
    return sorted_values[lo] * (1.0 - frac) + sorted_values[hi] * frac


def result_dict(corpus_id: str, res) -> dict:
    return {
        "corpus": corpus_id,
        "doc_id": res.snippet.doc_id,
        "level": res.g_r,
        "ordinal": res.snippet.ordinal,
        "fused_score": res.fused_score,
        "text": res.snippet.text,
    }


def eval_retrieval(
    pipeline: Pipeline,
    qa: list[QaExample],
    k_final: int | None = None,
    threads: int = 1,
) -> tuple[Metrics, EvalRun]:
    """Run every QA query through the pipeline and score answer containment.

    Per-query failures are recorded as zero-result records, never fatal.
    """
    if k_final is not None:
        pipeline = dataclasses.replace(pipeline, k_final=k_final)
    run = EvalRun(config=pipeline_config(pipeline))

    def process(example: QaExample) -> QueryRecord:
        start = time.perf_counter()
        weights: list[float] = []
        results: list[dict] = []
        try:
            e_q = embed_query(pipeline.embedder, example.question)
            weights = [float(v) for v in router_mod.forward(pipeline.router, e_q)]
            results = [result_dict(cid, res) for cid, res in pipeline.run(example.question)]
        except Exception as exc:  # recorded, not fatal
            return QueryRecord(
                example.question,
                example.answer,
                weights,
                [{"error": f"{type(exc).__name__}: {exc}"}],
                None,
                (time.perf_counter() - start) * 1000.0,
            )
        latency = (time.perf_counter() - start) * 1000.0
        hit_rank = None
        for rank, res in enumerate(results, 1):
            if contains_answer(res["text"], example.answer):
                hit_rank = rank
                break
        return QueryRecord(example.question, example.answer, weights, results, hit_rank, latency)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            run.records = list(pool.map(process, qa))
    else:
        run.records = [process(example) for example in qa]
    return run.aggregate(), run


def pipeline_config(pipeline: Pipeline) -> dict:
    some_set = next(iter(pipeline.corpora.values()))
    return {
        "corpora": sorted(pipeline.corpora),
        "n_gra": some_set.n_gra,
        "k_r": pipeline.k_r,
        "k": pipeline.k,
        "k_final": pipeline.k_final,
        "embedder": pipeline.embedder.kind,
        "dim": pipeline.embedder.dim,
        "seed": pipeline.router.seed,
    }


def metrics_csv(metrics: Metrics) -> str:
    """Deterministic metric rows; wall-clock values live in run.json only."""
    lines = ["metric,value"]
    lines.append(f"hitrate_at_k,{metrics.hitrate_at_k!r}")
    lines.append(f"mrr,{metrics.mrr!r}")
    for level, mean in enumerate(metrics.mean_weight_per_level, 1):
        lines.append(f"mean_weight_level_{level},{mean!r}")
    return "\n".join(lines) + "\n"


def weight_report(
    router: router_mod.RouterModel,
    embedder: EmbedderConfig,
    qa: list[QaExample],
    bins: int = 10,
) -> tuple[list[float], str]:
    """Mean router weight per level plus a per-level weight histogram CSV."""
    all_w = np.stack(
        [router_mod.forward(router, embed_query(embedder, ex.question)) for ex in qa]
    )
    means = [float(v) for v in all_w.mean(axis=0)]
    edges = np.linspace(0.0, 1.0, bins + 1)
    lines = ["level,mean_weight," + ",".join(f"bin_{i}" for i in range(bins))]
    for level in range(all_w.shape[1]):
        counts, _ = np.histogram(all_w[:, level], bins=edges)
        lines.append(
            f"{level + 1},{means[level]!r}," + ",".join(str(int(c)) for c in counts)
        )
    return means, "\n".join(lines) + "\n"


def sweep_k_r(
    pipeline: Pipeline, qa: list[QaExample], k_r_values: list[int]
) -> tuple[list[dict], str]:
    """Retrieval metrics for each candidate-pool size k_r, as rows and CSV."""
    rows = []
    for k_r in k_r_values:
        metrics, _ = eval_retrieval(dataclasses.replace(pipeline, k_r=k_r), qa)
        rows.append({"k_r": k_r, "hitrate_at_k": metrics.hitrate_at_k, "mrr": metrics.mrr})
    lines = ["k_r,hitrate_at_k,mrr"]
    for row in rows:
        lines.append(f"{row['k_r']},{row['hitrate_at_k']!r},{row['mrr']!r}")
    return rows, "\n".join(lines) + "\n"


def timing_report(
    pipeline: Pipeline, qa: list[QaExample], levels: list[int]
) -> tuple[list[dict], str]:
    """Retrieval-only latency as the level count grows (no LLM in the loop)."""
    rows = []
    for n_levels in levels:
        sliced = pipeline.with_levels(n_levels)
        latencies = sorted(sliced.run_timed(ex.question)[1] for ex in qa)
        rows.append(
            {
                "n_levels": n_levels,
                "p50_latency_ms": _percentile(latencies, 50.0),
                "p95_latency_ms": _percentile(latencies, 95.0),
            }
        )
    lines = ["n_levels,p50_latency_ms,p95_latency_ms"]
    for row in rows:
        lines.append(
            f"{row['n_levels']},{row['p50_latency_ms']:.3f},{row['p95_latency_ms']:.3f}"
        )
    return rows, "\n".join(lines) + "\n"


def save_run(run: EvalRun, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(run.as_dict(), fh, separators=(",", ":"))
    os.replace(tmp, path)
