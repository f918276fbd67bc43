"""Entity extraction and the co-occurrence graph."""

from __future__ import annotations

import itertools
import json
import math
from datetime import date

import pytest

from narrametrics.entities import (
    Edge,
    EntityGraph,
    Gazetteer,
    GazetteerEntry,
    annotation_extractor,
    backbone_filter,
    cooccurrence_counts,
    export_graph,
    extract_entities,
    gazetteer_extractor,
    load_entity_annotations,
    load_gazetteer,
    pmi_weights,
)
from narrametrics.errors import DataError

from conftest import mk_msg, ts


@pytest.fixture(scope="module")
def gaz():
    return load_gazetteer()


def small_gazetteer():
    return Gazetteer(
        entries={
            "Iran": GazetteerEntry(canonical="Iran", aliases=("islamic republic of iran",), category="gpe"),
            "US": GazetteerEntry(canonical="US", aliases=("usa", "united states"), category="gpe"),
            "IRGC": GazetteerEntry(canonical="IRGC", aliases=("revolutionary guard",), category="org"),
            "Khamenei": GazetteerEntry(canonical="Khamenei", aliases=(), category="person"),
        }
    )


class TestGazetteer:
    def test_bundled_loads(self, gaz):
        canon = set(gaz.entries)
        assert {"Iran", "US", "Israel", "IRGC", "Khamenei", "Mahsa Amini"} <= canon
        for e in gaz.entries.values():
            assert e.category in ("person", "org", "gpe")

    def test_custom_file(self, tmp_path):
        p = tmp_path / "gaz.json"
        p.write_text(
            json.dumps({"Foo": {"aliases": ["foo", "the foo"], "category": "org"}}),
            encoding="utf-8",
        )
        g = load_gazetteer(p)
        assert g.entries["Foo"].category == "org"
        assert extract_entities("the foo acted", g) == {"Foo"}

    def test_schema_violations(self, tmp_path):
        p = tmp_path / "gaz.json"
        p.write_text(json.dumps({"Foo": {"aliases": ["foo"], "category": "animal"}}), encoding="utf-8")
        with pytest.raises(DataError):
            load_gazetteer(p)

    def test_alias_collision_rejected(self):
        with pytest.raises(DataError):
            Gazetteer(
                entries={
                    "A": GazetteerEntry(canonical="A", aliases=("same",), category="org"),
                    "B": GazetteerEntry(canonical="B", aliases=("same",), category="org"),
                }
            )


class TestExtraction:
    def test_canonical_and_alias_hit(self):
        g = small_gazetteer()
        assert extract_entities("Iran and the US met", g) == {"Iran", "US"}
        assert extract_entities("the revolutionary guard parade", g) == {"IRGC"}

    def test_case_insensitive(self):
        g = small_gazetteer()
        assert extract_entities("IRAN spoke", g) == {"Iran"}

    def test_longest_match_wins(self):
        g = small_gazetteer()
        # "islamic republic of iran" must consume its tokens, not also match "iran"
        assert extract_entities("the islamic republic of iran announced", g) == {"Iran"}

    def test_match_consumes_tokens(self):
        g = small_gazetteer()
        # "united states" consumed as one span; trailing "states" alone is nothing
        assert extract_entities("united states policy", g) == {"US"}

    def test_once_per_message(self):
        g = small_gazetteer()
        found = extract_entities("iran iran iran", g)
        assert found == {"Iran"}

    def test_punctuation_boundaries(self):
        g = small_gazetteer()
        assert extract_entities("Iran, US; Khamenei!", g) == {"Iran", "US", "Khamenei"}

    def test_no_partial_word_match(self):
        g = small_gazetteer()
        assert extract_entities("usable iranians", g) == set()

    def test_accepts_message_object(self):
        g = small_gazetteer()
        assert extract_entities(mk_msg(text="Iran today"), g) == {"Iran"}


class TestAnnotations:
    def test_load_and_extract(self, tmp_path):
        p = tmp_path / "ann.jsonl"
        rows = [
            {"id": "m1", "entities": [{"text": "Iran", "category": "gpe"}, {"text": "OPEC", "category": "org"}]},
            {"id": "m2", "entities": []},
        ]
        p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        ann = load_entity_annotations(p)
        assert ann == {"m1": {"Iran", "OPEC"}, "m2": set()}
        extractor = annotation_extractor(ann)
        assert extractor(mk_msg("m1")) == {"Iran", "OPEC"}
        assert extractor(mk_msg("unknown")) == set()

    def test_bad_lines_rejected(self, tmp_path):
        p = tmp_path / "ann.jsonl"
        p.write_text('{"id": "m1"}\n', encoding="utf-8")
        with pytest.raises(DataError):
            load_entity_annotations(p)

    def test_duplicate_id_rejected(self, tmp_path):
        p = tmp_path / "ann.jsonl"
        row = json.dumps({"id": "m1", "entities": []})
        p.write_text(row + "\n" + row + "\n", encoding="utf-8")
        with pytest.raises(DataError):
            load_entity_annotations(p)


def corpus_200():
    """Deterministic 200-message corpus with planted co-mention structure."""
    import numpy as np

    rng = np.random.default_rng(99)
    pools = [
        ["Iran", "US"],
        ["Iran", "Israel"],
        ["Iran", "IRGC", "Khamenei"],
        ["US", "Israel"],
        ["Russia", "China"],
        ["Iran"],
        ["Tehran", "Mahsa Amini"],
        [],
    ]
    msgs = []
    for i in range(200):
        pool = pools[int(rng.integers(0, len(pools)))]
        filler = ["talks", "continue", "today"]
        words = list(pool) + filler
        perm = rng.permutation(len(words))
        text = " ".join(words[j] for j in perm)
        msgs.append(
            mk_msg(
                f"m{i}",
                text,
                created_utc=ts(2025, 6, 1 + int(rng.integers(0, 30))),
            )
        )
    return msgs


class TestCooccurrence:
    def test_clique_counting(self):
        msgs = [mk_msg("1", "Iran US Israel meet")]
        graph = cooccurrence_counts(msgs, gazetteer=load_gazetteer())
        pairs = set(graph.edges)
        assert pairs == {("Iran", "US"), ("Iran", "Israel"), ("Israel", "US")}
        assert all(e.count == 1 for e in graph.edges.values())

    def test_pairs_sorted_lexicographically(self, gaz):
        msgs = [mk_msg("1", "US and Iran")]
        graph = cooccurrence_counts(msgs, gazetteer=gaz)
        assert list(graph.edges) == [("Iran", "US")]

    def test_repeat_mentions_count_once(self, gaz):
        msgs = [mk_msg("1", "Iran Iran US US Iran")]
        graph = cooccurrence_counts(msgs, gazetteer=gaz)
        assert graph.edges[("Iran", "US")].count == 1

    def test_single_entity_message_adds_node_only(self, gaz):
        msgs = [mk_msg("1", "Iran alone")]
        graph = cooccurrence_counts(msgs, gazetteer=gaz)
        assert graph.nodes["Iran"] == 1
        assert graph.edges == {}

    def test_date_filter_inclusive(self, gaz):
        msgs = [
            mk_msg("1", "Iran US", created_utc=ts(2025, 6, 1)),
            mk_msg("2", "Iran US", created_utc=ts(2025, 6, 5)),
            mk_msg("3", "Iran US", created_utc=ts(2025, 6, 10)),
        ]
        graph = cooccurrence_counts(
            msgs, gazetteer=gaz, date_filter=(date(2025, 6, 5), date(2025, 6, 10))
        )
        assert graph.edges[("Iran", "US")].count == 2
        assert graph.n_messages == 2

    def test_open_ended_filters(self, gaz):
        msgs = [
            mk_msg("1", "Iran US", created_utc=ts(2025, 6, 1)),
            mk_msg("2", "Iran US", created_utc=ts(2025, 6, 5)),
        ]
        only_late = cooccurrence_counts(msgs, gazetteer=gaz, date_filter=(date(2025, 6, 2), None))
        assert only_late.n_messages == 1
        only_early = cooccurrence_counts(msgs, gazetteer=gaz, date_filter=(None, date(2025, 6, 2)))
        assert only_early.n_messages == 1

    def test_custom_extractor(self):
        msgs = [mk_msg("1", "whatever"), mk_msg("2", "whatever")]
        extractor = annotation_extractor({"1": {"A", "B"}, "2": {"B", "C"}})
        graph = cooccurrence_counts(msgs, extractor=extractor)
        assert graph.edges[("A", "B")].count == 1
        assert graph.edges[("B", "C")].count == 1
        assert graph.nodes == {"A": 1, "B": 2, "C": 1}

    def test_brute_force_on_planted_corpus(self, gaz):
        msgs = corpus_200()
        graph = cooccurrence_counts(msgs, gazetteer=gaz)

        node_counts: dict[str, int] = {}
        pair_counts: dict[tuple[str, str], int] = {}
        for m in msgs:
            ents = extract_entities(m.text, gaz)
            for e in ents:
                node_counts[e] = node_counts.get(e, 0) + 1
            for a, b in itertools.combinations(sorted(ents), 2):
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1
        assert graph.nodes == node_counts
        assert {p: e.count for p, e in graph.edges.items()} == pair_counts
        assert graph.n_messages == 200


class TestPmi:
    def test_values_exact(self, gaz):
        msgs = corpus_200()
        graph = pmi_weights(cooccurrence_counts(msgs, gazetteer=gaz), min_cooccur=2)
        assert graph.edges, "expected surviving edges"
        for (a, b), e in graph.edges.items():
            expect = math.log(e.count * graph.n_messages / (graph.nodes[a] * graph.nodes[b]))
            assert e.pmi == pytest.approx(expect, abs=1e-12)
            assert e.count >= 2
            assert e.pmi > 0

    def test_min_cooccur_drops_rare_pairs(self, gaz):
        msgs = [
            mk_msg("1", "Iran US"),
            mk_msg("2", "Iran Israel"),
            mk_msg("3", "Iran Israel"),
            mk_msg("4", "nothing relevant"),  # lifts N so the pair PMI is positive
        ]
        graph = pmi_weights(cooccurrence_counts(msgs, gazetteer=gaz), min_cooccur=2)
        assert ("Iran", "US") not in graph.edges
        assert ("Iran", "Israel") in graph.edges

    def test_boundary_pmi_of_zero_dropped(self, gaz):
        # c_ab * N == c_a * c_b makes pmi exactly ln(1) = 0: not kept
        msgs = [mk_msg("1", "Iran Israel"), mk_msg("2", "Iran Israel"), mk_msg("3", "Iran")]
        graph = cooccurrence_counts(msgs, gazetteer=gaz)
        assert graph.edges[("Iran", "Israel")].count == 2
        weighted = pmi_weights(graph, min_cooccur=2)
        assert weighted.edges == {}

    def test_nonpositive_pmi_dropped(self):
        # A and B occur widely but together no more than chance
        msgs = []
        n = 0
        for i in range(4):
            msgs.append(mk_msg(f"a{i}", "x"))
        extractor_map = {}
        # 2 joint, A alone 2, B alone 2, 4 empty => pmi = ln(2*10/(4*4)) = ln(1.25) > 0
        # use instead: 2 joint of 16 messages, A total 8, B total 8 => ln(2*16/64) = ln(0.5) < 0
        msgs = [mk_msg(f"m{i}") for i in range(16)]
        for i in range(16):
            ents = set()
            if i < 8:
                ents.add("A")
            if 6 <= i < 14:
                ents.add("B")
            extractor_map[f"m{i}"] = ents
        graph = cooccurrence_counts(msgs, extractor=annotation_extractor(extractor_map))
        assert graph.edges[("A", "B")].count == 2
        weighted = pmi_weights(graph, min_cooccur=2)
        assert ("A", "B") not in weighted.edges

    def test_nodes_kept_even_when_edges_drop(self, gaz):
        msgs = [mk_msg("1", "Iran US")]
        weighted = pmi_weights(cooccurrence_counts(msgs, gazetteer=gaz), min_cooccur=2)
        assert set(weighted.nodes) == {"Iran", "US"}
        assert weighted.edges == {}

    def test_min_cooccur_validation(self, gaz):
        graph = cooccurrence_counts([mk_msg("1", "Iran US")], gazetteer=gaz)
        with pytest.raises(ValueError):
            pmi_weights(graph, min_cooccur=0)


def brute_backbone(graph: EntityGraph, top_k: int) -> set[tuple[str, str]]:
    keep: set[tuple[str, str]] = set()
    for node in graph.nodes:
        incident = [(pair, e) for pair, e in graph.edges.items() if node in pair]
        incident.sort(key=lambda item: (-item[1].pmi, -item[1].count, item[0]))
        keep.update(pair for pair, _ in incident[:top_k])
    return keep


class TestBackbone:
    def _weighted(self):
        msgs = corpus_200()
        return pmi_weights(cooccurrence_counts(msgs, gazetteer=load_gazetteer()), min_cooccur=2)

    def test_brute_force_union(self):
        weighted = self._weighted()
        for top_k in (1, 2, 3):
            got = backbone_filter(weighted, top_k=top_k)
            assert set(got.edges) == brute_backbone(weighted, top_k)

    def test_idempotent(self):
        weighted = self._weighted()
        once = backbone_filter(weighted, top_k=2)
        twice = backbone_filter(once, top_k=2)
        assert set(once.edges) == set(twice.edges)
        assert once.nodes == twice.nodes

    def test_isolated_nodes_removed(self):
        weighted = self._weighted()
        got = backbone_filter(weighted, top_k=1)
        connected = {n for pair in got.edges for n in pair}
        assert set(got.nodes) == connected

    def test_requires_pmi(self, gaz):
        raw = cooccurrence_counts([mk_msg("1", "Iran US")], gazetteer=gaz)
        with pytest.raises(ValueError):
            backbone_filter(raw, top_k=2)

    def test_top_k_validation(self):
        weighted = self._weighted()
        with pytest.raises(ValueError):
            backbone_filter(weighted, top_k=0)


class TestExport:
    def _graph(self):
        msgs = corpus_200()
        weighted = pmi_weights(cooccurrence_counts(msgs, gazetteer=load_gazetteer()), min_cooccur=2)
        return backbone_filter(weighted, top_k=3)

    def test_csv(self, tmp_path):
        graph = self._graph()
        path = export_graph(graph, tmp_path / "g.csv", fmt="csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "entity_a,entity_b,cooccur_count,pmi_weight"
        assert len(lines) == 1 + len(graph.edges)
        body = [tuple(line.split(",")[:2]) for line in lines[1:]]
        assert body == sorted(body)

    def test_json(self, tmp_path):
        graph = self._graph()
        path = export_graph(graph, tmp_path / "g.json", fmt="json")
        payload = json.loads(path.read_text())
        assert payload["n_messages"] == graph.n_messages
        assert len(payload["edges"]) == len(graph.edges)
        names = [n["id"] for n in payload["nodes"]]
        assert names == sorted(names)

    def test_dot(self, tmp_path):
        graph = self._graph()
        path = export_graph(graph, tmp_path / "g.dot", fmt="dot")
        text = path.read_text()
        assert text.startswith("graph ")
        assert text.rstrip().endswith("}")
        assert '"Iran"' in text

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            export_graph(self._graph(), tmp_path / "g.xml", fmt="xml")
