import json

import pytest

from granur.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_IO,
    EXIT_OK,
    EXIT_REMOTE,
    PipelineConfig,
    build_parser,
    load_config_file,
    main,
    resolve_config,
)
from granur.errors import ConfigError

CORPUS = [
    {"id": "zoo", "title": "Zoo", "text": (
        "The lion hunts at night. The owl hunts rodents. Wolves travel in packs. "
        "Deer graze in meadows. Bears sleep through winter. Foxes are cunning. "
        "Otters swim in rivers. Eagles nest on cliffs."
    )},
    {"id": "sea", "title": "Sea", "text": (
        "Cod live in cold water. Rays glide over sand. Eels hide in rocks. "
        "Sharks patrol the reef. Whales sing in the deep."
    )},
]

QA = [
    {"question": "who hunts rodents at night", "answer": "owl"},
    {"question": "where do cod live", "answer": "cold water"},
    {"question": "who patrols the reef", "answer": "sharks"},
    {"question": "do wolves travel in packs", "answer": "packs"},
]


@pytest.fixture
def workspace(tmp_path):
    corpus = tmp_path / "animals.jsonl"
    corpus.write_text("\n".join(json.dumps(d) for d in CORPUS) + "\n")
    qa = tmp_path / "qa.jsonl"
    qa.write_text("\n".join(json.dumps(q) for q in QA) + "\n")
    return tmp_path


def run_pipeline(ws, seed="0"):
    """build-index -> build-labels -> train -> eval, returning output paths."""
    index_dir = ws / "index"
    labels = ws / "labels.jsonl"
    model = ws / "model.json"
    loss = ws / "loss.csv"
    run = ws / "run.json"
    csv = ws / "metrics.csv"
    steps = [
        ["build-index", "--corpus", str(ws / "animals.jsonl"), "--out", str(index_dir),
         "--n-gra", "3", "--base-size", "4"],
        ["build-labels", "--qa", str(ws / "qa.jsonl"), "--method", "tfidf_cosine",
         "--out", str(labels), "--index-dir", str(index_dir), "--dim", "64"],
        ["train", "--labels", str(labels), "--out", str(model), "--loss-csv", str(loss),
         "--seed", seed, "--max-epochs", "15"],
        ["eval", "--qa", str(ws / "qa.jsonl"), "--out", str(run), "--csv", str(csv),
         "--router", str(model), "--corpus-dir", str(index_dir), "--dim", "64"],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, f"step failed: {argv}"
    return {"index": index_dir, "labels": labels, "model": model,
            "loss": loss, "run": run, "csv": csv}


class TestHelp:
    @pytest.mark.parametrize(
        "sub", ["build-index", "build-graph", "build-labels", "train", "retrieve", "eval"]
    )
    def test_subcommand_help_exits_zero(self, sub, capsys):
        with pytest.raises(SystemExit) as exc:
            main([sub, "--help"])
        assert exc.value.code == 0
        assert sub in capsys.readouterr().out

    def test_top_level_help(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0


class TestConfigFile:
    def test_parse_values(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment line\n"
            "n_gra = 4\n"
            "corpora = a.jsonl, b.jsonl\n"
            "t_graph = 1.5\n"
            "mogg = true\n"
            "embedder = hashed_tfidf  # trailing comment\n"
        )
        values = load_config_file(str(cfg))
        assert values == {
            "n_gra": 4,
            "corpora": ["a.jsonl", "b.jsonl"],
            "t_graph": 1.5,
            "mogg": True,
            "embedder": "hashed_tfidf",
        }

    def test_unknown_key_has_line_number(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_gra = 4\nbogus = 1\n")
        with pytest.raises(ConfigError, match=":2:"):
            load_config_file(str(cfg))

    def test_bad_value_has_line_number(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_gra = lots\n")
        with pytest.raises(ConfigError, match=":1:"):
            load_config_file(str(cfg))

    def test_flags_win_over_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_gra = 4\nseed = 9\n")
        args = build_parser().parse_args(
            ["build-index", "--config", str(cfg), "--n-gra", "2", "--out", "x"]
        )
        resolved = resolve_config(args)
        assert resolved.n_gra == 2  # flag wins
        assert resolved.seed == 9  # file survives where no flag given

    def test_env_overrides_endpoint(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GRANUR_EMBED_URL", "http://router-env:9999")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("embedder = remote\nendpoint = http://file:1\n")
        args = build_parser().parse_args(
            ["build-index", "--config", str(cfg), "--out", "x"]
        )
        resolved = resolve_config(args)
        assert resolved.endpoint == "http://router-env:9999"
        assert resolved.dim == 768  # remote default

    def test_validation(self):
        with pytest.raises(ConfigError):
            PipelineConfig(n_gra=0).validate()
        with pytest.raises(ConfigError):
            PipelineConfig(embedder="remote").validate()
        with pytest.raises(ConfigError):
            PipelineConfig(sentences_per_node=3).validate()


class TestEndToEnd:
    def test_full_pipeline(self, workspace, capsys):
        paths = run_pipeline(workspace)
        assert (paths["index"] / "animals" / "meta.json").exists()
        assert (paths["index"] / "animals" / "level_3" / "postings.bin").exists()
        assert paths["labels"].read_text().count("\n") == len(QA)
        assert json.loads(paths["model"].read_text())["n_gra"] == 3
        assert paths["loss"].read_text().startswith("epoch,loss")
        run = json.loads(paths["run"].read_text())
        assert run["v"] == 1 and len(run["records"]) == len(QA)
        assert paths["csv"].read_text().startswith("metric,value")

    def test_retrieve_emits_json(self, workspace, capsys):
        paths = run_pipeline(workspace)
        capsys.readouterr()
        code = main([
            "retrieve", "--query", "who hunts rodents", "--router", str(paths["model"]),
            "--corpus-dir", str(paths["index"]), "--k-r", "3", "--k", "3",
            "--k-final", "2", "--dim", "64",
        ])
        assert code == EXIT_OK
        results = json.loads(capsys.readouterr().out)
        assert 1 <= len(results) <= 2
        assert set(results[0]) == {"corpus", "doc_id", "level", "ordinal",
                                   "fused_score", "text"}
        assert results[0]["corpus"] == "animals"

    def test_idempotent_outputs(self, workspace, tmp_path):
        first = run_pipeline(workspace)
        snapshot = {
            name: first[name].read_bytes() for name in ("labels", "model", "loss", "csv")
        }
        index_bytes = (first["index"] / "animals" / "level_1" / "postings.bin").read_bytes()
        run1 = json.loads(first["run"].read_text())

        second = run_pipeline(workspace)
        for name, blob in snapshot.items():
            assert second[name].read_bytes() == blob, f"{name} not byte-identical"
        assert (second["index"] / "animals" / "level_1" / "postings.bin").read_bytes() == index_bytes
        run2 = json.loads(second["run"].read_text())
        for record in (*run1["records"], *run2["records"]):
            record["latency_ms"] = None  # wall-clock, excluded like timestamps
        run1["aggregates"]["p50_latency_ms"] = run2["aggregates"]["p50_latency_ms"] = 0
        run1["aggregates"]["p95_latency_ms"] = run2["aggregates"]["p95_latency_ms"] = 0
        assert run1 == run2

    def test_build_graph_and_retrieve(self, workspace, capsys):
        graph_dir = workspace / "graph"
        assert main([
            "build-graph", "--corpus", str(workspace / "animals.jsonl"),
            "--out", str(graph_dir), "--n-gra", "3", "--k-graph", "2",
        ]) == EXIT_OK
        assert (graph_dir / "animals" / "graph.jsonl").exists()
        labels = workspace / "glabels.jsonl"
        assert main([
            "build-labels", "--qa", str(workspace / "qa.jsonl"), "--method", "hitrate",
            "--out", str(labels), "--index-dir", str(graph_dir), "--dim", "64",
        ]) == EXIT_OK
        model = workspace / "gmodel.json"
        assert main([
            "train", "--labels", str(labels), "--out", str(model), "--max-epochs", "10",
        ]) == EXIT_OK
        capsys.readouterr()
        assert main([
            "retrieve", "--query", "wolves in packs", "--router", str(model),
            "--corpus-dir", str(graph_dir), "--dim", "64",
        ]) == EXIT_OK
        results = json.loads(capsys.readouterr().out)
        assert results and results[0]["corpus"] == "animals"

    def test_mogg_flag_on_build_index(self, workspace):
        out = workspace / "via_flag"
        assert main([
            "build-index", "--corpus", str(workspace / "animals.jsonl"),
            "--out", str(out), "--n-gra", "2", "--mogg",
        ]) == EXIT_OK
        meta = json.loads((out / "animals" / "meta.json").read_text())
        assert meta["kind"] == "graph"


class TestExitCodes:
    def test_config_error(self, workspace):
        code = main(["build-index", "--out", str(workspace / "x")])  # no corpus
        assert code == EXIT_CONFIG

    def test_io_error(self, workspace):
        code = main([
            "build-index", "--corpus", str(workspace / "missing.jsonl"),
            "--out", str(workspace / "x"),
        ])
        assert code == EXIT_IO

    def test_data_error(self, workspace):
        bad = workspace / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
        code = main(["build-index", "--corpus", str(bad), "--out", str(workspace / "x")])
        assert code == EXIT_DATA

    def test_remote_error(self, workspace):
        paths = run_pipeline(workspace)
        code = main([
            "retrieve", "--query", "who hunts rodents", "--router", str(paths["model"]),
            "--corpus-dir", str(paths["index"]), "--embedder", "remote",
            "--endpoint", "http://127.0.0.1:1", "--timeout-ms", "200", "--dim", "64",
        ])
        assert code == EXIT_REMOTE

    def test_eval_records_remote_failures_not_fatal(self, workspace):
        paths = run_pipeline(workspace)
        code = main([
            "eval", "--qa", str(workspace / "qa.jsonl"), "--out", str(workspace / "r.json"),
            "--csv", str(workspace / "m.csv"), "--router", str(paths["model"]),
            "--corpus-dir", str(paths["index"]), "--embedder", "remote",
            "--endpoint", "http://127.0.0.1:1", "--timeout-ms", "200", "--dim", "64",
        ])
        assert code == EXIT_OK
        run = json.loads((workspace / "r.json").read_text())
        assert all("error" in r["results"][0] for r in run["records"])

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["build-index", "--bogus"])
        assert exc.value.code == 2
