import json
import logging

import numpy as np
import pytest

from granur.corpus import Document, tokenize
from granur.embed import EmbedderConfig
from granur.errors import EmptyText, NoCandidates
from granur.index import CorpusSet, search
from granur.softlabel import (
    QaExample,
    best_per_level,
    build_dataset,
    build_soft_label,
    load_labels,
    load_qa,
    save_labels,
    similarity,
)

HASHED = EmbedderConfig(dim=64)


class TestBuildSoftLabel:
    def test_worked_example_one(self):
        label = build_soft_label([0.0, 0.32, 0.11, 0.88, 0.45])
        assert list(label.values) == [0.0, 0.0, 0.0, 0.8, 0.2]
        assert label.best_level == 4
        assert label.second_level == 5

    def test_worked_example_two(self):
        label = build_soft_label([0.95, 0.07, 0.22, 0.11, 0.19])
        assert list(label.values) == [0.8, 0.0, 0.2, 0.0, 0.0]
        assert label.best_level == 1
        assert label.second_level == 3

    def test_all_ties_break_toward_finer(self):
        label = build_soft_label([0.5, 0.5, 0.5, 0.5, 0.5])
        assert list(label.values) == [0.8, 0.2, 0.0, 0.0, 0.0]

    def test_zero_is_a_competitor_but_none_is_absent(self):
        # a literal 0.0 can win when it is the only candidate
        label = build_soft_label([0.0, None, None, None, None])
        assert list(label.values) == [0.8, 0.0, 0.0, 0.0, 0.0]
        assert label.second_level is None
        # ... and a None gap never takes the 0.2 slot
        label = build_soft_label([None, 0.4, None, None, None])
        assert list(label.values) == [0.0, 0.8, 0.0, 0.0, 0.0]

    def test_sum_is_point_eight_or_one(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            sims = [
                float(rng.uniform()) if rng.uniform() < 0.7 else None for _ in range(5)
            ]
            if all(s is None for s in sims):
                continue
            label = build_soft_label(sims)
            n_candidates = sum(s is not None for s in sims)
            expected_sum = 1.0 if n_candidates >= 2 else 0.8
            assert sum(label.values) == pytest.approx(expected_sum)
            assert sorted(set(label.values) - {0.0}) in ([0.8], [0.2, 0.8])

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        sims = [0.91, 0.13, 0.57, 0.02, 0.33]  # distinct: no tie-break involved
        base = build_soft_label(sims)
        for _ in range(20):
            perm = rng.permutation(5)
            permuted = build_soft_label([sims[i] for i in perm])
            assert [permuted.values[j] for j in range(5)] == [
                base.values[perm[j]] for j in range(5)
            ]

    def test_no_candidates(self):
        with pytest.raises(NoCandidates):
            build_soft_label([None, None, None])

    def test_configurable_values(self):
        label = build_soft_label([0.1, 0.9, 0.5], values=(0.7, 0.3))
        assert list(label.values) == [0.0, 0.7, 0.3]


class TestSimilarity:
    def test_hitrate_full_containment(self):
        assert similarity("hitrate", "the quick brown fox jumps", "quick fox") == 1.0

    def test_hitrate_disjoint(self):
        assert similarity("hitrate", "alpha beta", "gamma delta") == 0.0

    def test_hitrate_partial_unique_tokens(self):
        # label tokens {one, two, three}; snippet holds two of three
        got = similarity("hitrate", "one two one", "one two three")
        assert got == pytest.approx(2.0 / 3.0)

    def test_tfidf_identical_strings(self):
        assert similarity("tfidf_cosine", "same text here", "same text here") == (
            pytest.approx(1.0, abs=1e-9)
        )

    def test_tfidf_uses_idf_weighting(self):
        # with idf from a corpus where "common" is everywhere and "rare" is
        # not, sharing "rare" must count more than sharing "common"
        docs = [Document(f"d{i}", "", f"common filler{i} rare" if i == 0 else f"common filler{i}") for i in range(6)]
        cs = CorpusSet.build(docs, n_gra=1, base_size=8)
        idf = cs.level1_index
        share_rare = similarity("tfidf_cosine", "rare alpha", "rare beta", idf=idf)
        share_common = similarity("tfidf_cosine", "common alpha", "common beta", idf=idf)
        assert share_rare > share_common

    def test_embedding_cosine_range(self):
        got = similarity(
            "remote_embedding_cosine", "one two", "one two", embedder=HASHED
        )
        assert got == pytest.approx(1.0, abs=1e-9)
        disjoint = similarity(
            "remote_embedding_cosine", "granite sparrow", "nebula harbor", embedder=HASHED
        )
        assert -1.0 <= disjoint <= 1.0

    def test_empty_inputs_rejected(self):
        with pytest.raises(EmptyText):
            similarity("hitrate", "", "label")
        with pytest.raises(EmptyText):
            similarity("hitrate", "snippet", "  ")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            similarity("levenshtein", "a", "b")


def toy_corpus_set(n_gra=5):
    docs = [
        Document("zoo", "", "lion tiger bear. wolf fox deer. owl hawk crow. "
                            "ant bee wasp. cod eel ray."),
        Document("lab", "", "proton neutron electron. quark gluon photon. "
                            "atom ion molecule. acid base salt."),
    ]
    return CorpusSet.build(docs, n_gra=n_gra, base_size=3, name="toy")


class TestBestPerLevel:
    def test_no_match_gives_all_none(self):
        cs = toy_corpus_set()
        got = best_per_level(cs, "zzz qqq")
        assert got == [(1, None), (2, None), (3, None), (4, None), (5, None)]

    def test_equals_search_k1(self):
        cs = toy_corpus_set()
        got = best_per_level(cs, "quark photon")
        for level, entry in got:
            hits = search(cs.index_set.per_level[level - 1], "quark photon", 1)
            assert entry == (hits[0] if hits else None)

    def test_matches_bruteforce_per_level_max(self):
        cs = toy_corpus_set()
        query = "tiger wolf atom"
        for level, entry in best_per_level(cs, query):
            index = cs.index_set.per_level[level - 1]
            all_hits = search(index, query, index.n_chunks)
            assert entry == (all_hits[0] if all_hits else None)


class TestBuildDataset:
    QA = [
        QaExample("which predator hunts deer", "wolf"),
        QaExample("what orbits in an atom", "electron", snippet="proton neutron electron"),
        QaExample("zzz qqq unmatched", "nothing"),
    ]

    def test_examples_and_records(self, caplog):
        cs = toy_corpus_set()
        with caplog.at_level(logging.INFO, "granur.softlabel"):
            examples, records = build_dataset(cs, self.QA, "hitrate", HASHED)
        assert len(examples) == 2
        assert [r.qid for r in records] == [0, 1]
        assert "skipping qa 2" in caplog.text
        for example, record in zip(examples, records):
            assert example.embedding.shape == (64,)
            assert sorted(set(record.soft_label)) in ([0.0, 0.8], [0.0, 0.2, 0.8])
            assert record.method == "hitrate"
            assert len(record.sims) == 5

    def test_label_uses_snippet_when_given(self):
        assert self.QA[1].label_text == "proton neutron electron"
        assert self.QA[0].label_text == "which predator hunts deer wolf"

    def test_threaded_output_order_matches_serial(self):
        cs = toy_corpus_set()
        serial = build_dataset(cs, self.QA, "tfidf_cosine", HASHED, threads=1)
        threaded = build_dataset(cs, self.QA, "tfidf_cosine", HASHED, threads=4)
        assert [r.qid for r in serial[1]] == [r.qid for r in threaded[1]]
        for a, b in zip(serial[1], threaded[1]):
            assert a == b

    def test_label_file_round_trip(self, tmp_path):
        cs = toy_corpus_set()
        examples, records = build_dataset(cs, self.QA, "hitrate", HASHED)
        path = str(tmp_path / "labels.jsonl")
        save_labels(records, path)
        loaded = load_labels(path)
        assert len(loaded) == len(examples)
        for built, read in zip(examples, loaded):
            assert np.array_equal(built.embedding, read.embedding)
            assert np.array_equal(built.soft_label, read.soft_label)
        lines = [json.loads(l) for l in (tmp_path / "labels.jsonl").read_text().splitlines()]
        assert set(lines[0]) == {"qid", "embedding", "soft_label", "sims", "method"}


class TestLoadQa:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "qa.jsonl"
        path.write_text(
            '{"question": "q1", "answer": "a1"}\n'
            '{"question": "q2", "answer": "a2", "snippet": "ground truth"}\n'
        )
        qa = load_qa(str(path))
        assert qa[0] == QaExample("q1", "a1")
        assert qa[1].snippet == "ground truth"
