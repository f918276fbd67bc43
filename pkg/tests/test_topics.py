"""Topic factorization and the derived per-topic views."""

from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest

from narrametrics.errors import DataError
from narrametrics.topics import (
    UNASSIGNED,
    assign_topics,
    dominant_topic,
    nmf_fit,
    top_terms,
    topic_label,
    topic_similarity_graph,
    topic_volume_series,
    write_factor_csv,
    write_labels_json,
    write_similarity_csv,
    write_similarity_dot,
)
from narrametrics.vectorize import Vocabulary

from conftest import mk_msg, ts


def random_v(seed: int, n: int = 30, m: int = 50) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random((n, m))


class TestNmfFit:
    def test_shapes_and_nonnegativity(self):
        V = random_v(0)
        model = nmf_fit(V, k=5, max_iter=50, seed=0)
        assert model.W.shape == (30, 5)
        assert model.H.shape == (5, 50)
        assert (model.W >= 0).all()
        assert (model.H >= 0).all()
        assert model.k == 5 and model.seed == 0

    def test_trace_monotone_nonincreasing(self):
        V = random_v(1)
        model = nmf_fit(V, k=5, max_iter=200, tol=0.0, seed=1)
        trace = model.objective_trace
        assert len(trace) == 201  # initial error plus one entry per iteration
        assert all(b <= a + 1e-10 for a, b in zip(trace, trace[1:]))

    def test_trace_matches_direct_objective(self):
        V = random_v(2)
        model = nmf_fit(V, k=4, max_iter=30, tol=0.0, seed=2)
        direct = float(np.linalg.norm(V - model.W @ model.H, "fro"))
        assert math.isclose(model.objective_trace[-1], direct, rel_tol=1e-9)

    def test_seed_reproducible(self):
        V = random_v(3)
        a = nmf_fit(V, k=3, max_iter=40, seed=9)
        b = nmf_fit(V, k=3, max_iter=40, seed=9)
        assert np.array_equal(a.W, b.W)
        assert np.array_equal(a.H, b.H)
        assert a.objective_trace == b.objective_trace

    def test_different_seeds_differ(self):
        V = random_v(3)
        a = nmf_fit(V, k=3, max_iter=10, seed=0)
        b = nmf_fit(V, k=3, max_iter=10, seed=1)
        assert not np.array_equal(a.W, b.W)

    def test_early_stop_on_tolerance(self):
        V = random_v(4)
        loose = nmf_fit(V, k=3, max_iter=400, tol=1e-2, seed=0)
        assert len(loose.objective_trace) < 401

    def test_rank_one_exact_recovery(self):
        rng = np.random.default_rng(5)
        V = np.outer(rng.random(20), rng.random(15))
        model = nmf_fit(V, k=1, max_iter=500, tol=0.0, seed=5)
        rel = model.objective_trace[-1] / np.linalg.norm(V, "fro")
        assert rel < 1e-6

    def test_sparse_input_matches_dense(self):
        import scipy.sparse as sp

        V = random_v(6)
        dense = nmf_fit(V, k=4, max_iter=25, seed=6)
        sparse = nmf_fit(sp.csr_matrix(V), k=4, max_iter=25, seed=6)
        assert np.allclose(dense.W, sparse.W, atol=1e-10)
        assert np.allclose(dense.H, sparse.H, atol=1e-10)

    def test_k_validation(self):
        V = random_v(0, n=6, m=8)
        with pytest.raises(ValueError):
            nmf_fit(V, k=0)
        with pytest.raises(ValueError):
            nmf_fit(V, k=7)  # k > min(n_docs, n_terms)

    def test_negative_input_rejected(self):
        V = random_v(0)
        V[3, 4] = -0.5
        with pytest.raises(ValueError):
            nmf_fit(V, k=2)

    def test_all_zero_matrix_rejected(self):
        with pytest.raises(DataError):
            nmf_fit(np.zeros((5, 5)), k=2)


class TestAssignment:
    def _model(self, W):
        return type("M", (), {"W": np.asarray(W, dtype=float), "k": np.asarray(W).shape[1]})()

    def test_argmax(self):
        model = self._model([[0.1, 0.9], [0.8, 0.2]])
        assert dominant_topic(model, 0) == 1
        assert dominant_topic(model, 1) == 0

    def test_tie_goes_to_lowest_id(self):
        model = self._model([[0.5, 0.5, 0.1]])
        assert dominant_topic(model, 0) == 0

    def test_zero_row_unassigned(self):
        model = self._model([[0.0, 0.0]])
        assert dominant_topic(model, 0) == UNASSIGNED == -1

    def test_assign_topics_bulk(self):
        model = self._model([[0.1, 0.9], [0.0, 0.0], [0.7, 0.3]])
        assert assign_topics(model) == [1, UNASSIGNED, 0]


class TestTopTerms:
    def _fixture(self):
        H = np.array([
            [0.9, 0.1, 0.5],
            [0.2, 0.2, 0.8],
        ])
        model = type("M", (), {"H": H, "k": 2})()
        vocab = Vocabulary(
            terms=["alpha", "beta", "gamma"],
            index={"alpha": 0, "beta": 1, "gamma": 2},
            doc_freq={"alpha": 1, "beta": 1, "gamma": 1},
        )
        return model, vocab

    def test_descending_weight(self):
        model, vocab = self._fixture()
        assert top_terms(model, vocab, 2) == [["alpha", "gamma"], ["gamma", "alpha"]]

    def test_weight_tie_breaks_lexicographically(self):
        model, vocab = self._fixture()
        # topic 1: alpha and beta tie at 0.2; alpha sorts first
        assert top_terms(model, vocab, 3)[1] == ["gamma", "alpha", "beta"]

    def test_m_out_of_range(self):
        model, vocab = self._fixture()
        with pytest.raises(ValueError):
            top_terms(model, vocab, 0)
        with pytest.raises(ValueError):
            top_terms(model, vocab, 4)

    def test_label_format(self):
        assert topic_label(0) == "topic_0"
        assert topic_label(12) == "topic_12"


class TestVolumeSeries:
    def test_top_n_and_other(self):
        msgs = [
            mk_msg("1", created_utc=ts(2025, 6, 1)),
            mk_msg("2", created_utc=ts(2025, 6, 1)),
            mk_msg("3", created_utc=ts(2025, 6, 2)),
            mk_msg("4", created_utc=ts(2025, 6, 2)),
            mk_msg("5", created_utc=ts(2025, 6, 2)),
        ]
        assignments = [0, 0, 1, 2, UNASSIGNED]
        series = topic_volume_series(assignments, msgs, top_n=1)
        assert set(series) == {"topic_0", "Other"}
        topic0 = series["topic_0"]
        assert [(d.isoformat(), v) for d, v in topic0.items()] == [("2025-06-01", 2.0)]
        other = series["Other"]
        assert [(d.isoformat(), v) for d, v in other.items()] == [("2025-06-02", 2.0)]

    def test_volume_tie_prefers_lower_topic_id(self):
        msgs = [mk_msg(str(i)) for i in range(4)]
        series = topic_volume_series([3, 3, 1, 1], msgs, top_n=1)
        assert "topic_1" in series

    def test_unassigned_never_counted(self):
        msgs = [mk_msg("1"), mk_msg("2")]
        series = topic_volume_series([UNASSIGNED, UNASSIGNED], msgs, top_n=3)
        assert series == {}

    def test_conservation_over_assigned(self):
        rng = np.random.default_rng(11)
        msgs = [
            mk_msg(str(i), created_utc=ts(2025, 6, 1 + int(rng.integers(0, 20))))
            for i in range(200)
        ]
        assignments = [int(a) for a in rng.integers(-1, 6, size=200)]
        series = topic_volume_series(assignments, msgs, top_n=3)
        total = sum(v for s in series.values() for v in s.values.values())
        assert total == sum(1 for a in assignments if a != UNASSIGNED)


class TestSimilarityGraph:
    def _model(self, H):
        H = np.asarray(H, dtype=float)
        return type("M", (), {"H": H, "k": H.shape[0]})()

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(13)
        H = rng.random((6, 12))
        model = self._model(H)
        graph = topic_similarity_graph(model, neighbors_k=2, min_similarity=0.1)

        norms = np.linalg.norm(H, axis=1)
        S = (H @ H.T) / np.outer(norms, norms)
        expect = set()
        for i in range(6):
            order = sorted((j for j in range(6) if j != i), key=lambda j: (-S[i, j], j))
            for j in order[:2]:
                if S[i, j] >= 0.1:
                    expect.add((min(i, j), max(i, j)))
        assert {(i, j) for i, j, _ in graph.edges} == expect
        for i, j, sim in graph.edges:
            assert sim == pytest.approx(S[i, j], abs=1e-12)

    def test_edges_sorted_and_undirected(self):
        rng = np.random.default_rng(14)
        model = self._model(rng.random((5, 9)))
        graph = topic_similarity_graph(model, neighbors_k=3, min_similarity=0.0)
        pairs = [(i, j) for i, j, _ in graph.edges]
        assert pairs == sorted(pairs)
        assert all(i < j for i, j in pairs)

    def test_min_similarity_filters(self):
        H = np.array([[1.0, 0.0], [0.0, 1.0]])  # orthogonal topics
        graph = topic_similarity_graph(self._model(H), neighbors_k=1, min_similarity=0.5)
        assert graph.edges == []

    def test_single_topic_no_edges(self):
        graph = topic_similarity_graph(self._model([[1.0, 2.0]]), neighbors_k=3, min_similarity=0.0)
        assert graph.edges == []

    def test_zero_row_similarity_is_zero(self):
        H = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.9]])
        graph = topic_similarity_graph(self._model(H), neighbors_k=2, min_similarity=0.01)
        assert all(0 not in (i, j) for i, j, _ in graph.edges)

    def test_bad_neighbors_k(self):
        with pytest.raises(ValueError):
            topic_similarity_graph(self._model([[1.0]]), neighbors_k=0, min_similarity=0.0)


class TestWriters:
    def test_factor_csv_shape(self, tmp_path):
        W = np.array([[1.5, 0.25], [0.0, 2.0]])
        write_factor_csv(W, tmp_path / "w.csv", prefix="doc")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "doc,c0,c1"
        assert lines[1] == "0,1.5,0.25"
        assert lines[2] == "1,0.0,2.0"

    def test_labels_json(self, tmp_path):
        H = np.array([[0.9, 0.1], [0.1, 0.9]])
        model = type("M", (), {"H": H, "k": 2})()
        vocab = Vocabulary(
            terms=["alpha", "beta"],
            index={"alpha": 0, "beta": 1},
            doc_freq={"alpha": 1, "beta": 1},
        )
        write_labels_json(model, vocab, tmp_path / "labels.json", m=2)
        payload = json.loads((tmp_path / "labels.json").read_text())
        assert payload == {"topic_0": ["alpha", "beta"], "topic_1": ["beta", "alpha"]}

    def test_similarity_outputs(self, tmp_path):
        rng = np.random.default_rng(15)
        H = rng.random((4, 6))
        model = type("M", (), {"H": H, "k": 4})()
        graph = topic_similarity_graph(model, neighbors_k=2, min_similarity=0.0)
        write_similarity_dot(graph, tmp_path / "g.dot")
        write_similarity_csv(graph, tmp_path / "g.csv")
        dot = (tmp_path / "g.dot").read_text()
        assert dot.startswith("graph ")
        assert dot.rstrip().endswith("}")
        csv_lines = (tmp_path / "g.csv").read_text().splitlines()
        assert csv_lines[0] == "topic_a,topic_b,cosine"
        assert len(csv_lines) == 1 + len(graph.edges)
