"""Entity extraction and PMI-weighted co-occurrence networks.

Extraction is gazetteer-based: case-insensitive longest-match-first over
token runs, so "Islamic Republic" wins over any single-token alias inside
it, and possessives match because tokenization splits "Tehran's" into
"tehran" + "s". Each entity counts at most once per message. An external
NER can replace the gazetteer through a JSONL annotation exchange keyed by
message id.

Co-occurrence is message-level: every unordered pair of entities mentioned
together in one message increments that edge. Edge weights are pointwise
mutual information over message counts; the backbone filter keeps the union
of each node's top-k incident edges by PMI, which makes it idempotent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence

from narrametrics.errors import DataError
from narrametrics.vectorize import word_tokens

CATEGORIES = ("person", "org", "gpe")


@dataclass(frozen=True)
class GazetteerEntry:
    canonical: str
    aliases: tuple[str, ...]
    category: str


@dataclass
class Gazetteer:
    entries: dict[str, GazetteerEntry]
    # token-tuple of every alias (and canonical name) -> canonical
    alias_index: dict[tuple[str, ...], str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.alias_index:
            index: dict[tuple[str, ...], str] = {}
            for canonical, entry in self.entries.items():
                names = (canonical, *entry.aliases)
                for name in names:
                    key = tuple(word_tokens(name))
                    if not key:
                        raise DataError(f"gazetteer alias {name!r} has no tokens")
                    owner = index.get(key)
                    if owner is not None and owner != canonical:
                        raise DataError(
                            f"alias {name!r} maps to both {owner!r} and {canonical!r}"
                        )
                    index[key] = canonical
            self.alias_index = index

    @property
    def max_alias_len(self) -> int:
        return max(len(k) for k in self.alias_index)


def load_gazetteer(path: Optional[str | Path] = None) -> Gazetteer:
    """Load the bundled gazetteer or a user-supplied JSON file.

    Schema: {canonical: {"aliases": [...], "category": "person|org|gpe"}}.
    """
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("narrametrics.data").joinpath("gazetteer.json").read_text("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"gazetteer is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not raw:
        raise DataError("gazetteer must be a non-empty JSON object")
    entries: dict[str, GazetteerEntry] = {}
    for canonical, spec in raw.items():
        if not isinstance(spec, dict):
            raise DataError(f"gazetteer entry {canonical!r} must be an object")
        category = spec.get("category")
        if category not in CATEGORIES:
            raise DataError(f"gazetteer entry {canonical!r} has bad category {category!r}")
        aliases = spec.get("aliases", [])
        if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
            raise DataError(f"gazetteer entry {canonical!r} has bad aliases")
        entries[canonical] = GazetteerEntry(
            canonical=canonical, aliases=tuple(aliases), category=category
        )
    return Gazetteer(entries=entries)


def extract_entities(text_or_message, gazetteer: Gazetteer) -> set[str]:
    """Canonical entities mentioned in a message, each at most once.

    Scans tokens left to right trying the longest alias first; a match
    consumes its tokens, so sub-aliases inside it cannot fire again.
    """
    text = text_or_message if isinstance(text_or_message, str) else text_or_message.text
    tokens = word_tokens(text)
    found: set[str] = set()
    index = gazetteer.alias_index
    longest = gazetteer.max_alias_len
    i = 0
    n = len(tokens)
    while i < n:
        matched = False
        for span in range(min(longest, n - i), 0, -1):
            canonical = index.get(tuple(tokens[i : i + span]))
            if canonical is not None:
                found.add(canonical)
                i += span
                matched = True
                break
        if not matched:
            i += 1
    return found


def gazetteer_extractor(gazetteer: Gazetteer) -> Callable:
    return lambda message: extract_entities(message, gazetteer)


def load_entity_annotations(path: str | Path) -> dict[str, set[str]]:
    """Read an external NER's annotations.

    JSONL exchange format, one message per line:
    {"id": "...", "entities": [{"text": "...", "category": "..."}, ...]}
    """
    path = Path(path)
    annotations: dict[str, set[str]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} line {lineno}: not valid JSON") from exc
            msg_id = obj.get("id")
            ents = obj.get("entities")
            if not isinstance(msg_id, str) or not isinstance(ents, list):
                raise DataError(f"{path} line {lineno}: need 'id' and 'entities' fields")
            if msg_id in annotations:
                raise DataError(f"{path} line {lineno}: duplicate id {msg_id!r}")
            names = set()
            for ent in ents:
                if not isinstance(ent, dict) or not isinstance(ent.get("text"), str):
                    raise DataError(f"{path} line {lineno}: bad entity record")
                names.add(ent["text"])
            annotations[msg_id] = names
    return annotations


def annotation_extractor(annotations: dict[str, set[str]]) -> Callable:
    return lambda message: annotations.get(message.id, set())


@dataclass(frozen=True)
class Edge:
    count: int
    pmi: Optional[float] = None


@dataclass
class EntityGraph:
    """Nodes map entities to mention frequency (messages containing them);
    edges map sorted pairs to co-occurrence counts and, once weighted, PMI.
    ``n_messages`` is the number of messages scanned, the N of the PMI."""

    nodes: dict[str, int]
    edges: dict[tuple[str, str], Edge]
    n_messages: int
    window: tuple[Optional[date], Optional[date]] = (None, None)


def cooccurrence_counts(
    messages: Sequence,
    gazetteer: Optional[Gazetteer] = None,
    date_filter: Optional[tuple[Optional[date], Optional[date]]] = None,
    extractor: Optional[Callable] = None,
) -> EntityGraph:
    """Build the raw co-occurrence graph.

    A message mentioning entities {a, b, c} contributes one count to each
    of the pairs (a,b), (a,c), (b,c). ``date_filter`` keeps messages whose
    UTC day falls inside the inclusive range; either bound may be None.
    """
    if extractor is None:
        if gazetteer is None:
            raise ValueError("need a gazetteer or an extractor")
        extractor = gazetteer_extractor(gazetteer)
    start, end = date_filter if date_filter is not None else (None, None)
    nodes: dict[str, int] = {}
    edges: dict[tuple[str, str], int] = {}
    scanned = 0
    for m in messages:
        d = m.day
        if start is not None and d < start:
            continue
        if end is not None and d > end:
            continue
        scanned += 1
        found = extractor(m)
        for name in found:
            nodes[name] = nodes.get(name, 0) + 1
        for a, b in combinations(sorted(found), 2):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    return EntityGraph(
        nodes=nodes,
        edges={pair: Edge(count=c) for pair, c in edges.items()},
        n_messages=scanned,
        window=(start, end),
    )


def pmi_weights(graph: EntityGraph, min_cooccur: int = 2) -> EntityGraph:
    """Weight edges by pointwise mutual information.

    pmi(a, b) = ln( (c_ab / N) / ((c_a / N) * (c_b / N)) ) over message
    counts. Edges below ``min_cooccur`` or with non-positive PMI (pairs
    appearing no more than independence predicts) are dropped; node
    frequencies are kept untouched.
    """
    if min_cooccur < 1:
        raise ValueError(f"min_cooccur must be >= 1, got {min_cooccur}")
    if graph.n_messages <= 0:
        raise DataError("PMI needs a graph built from at least one message")
    n = graph.n_messages
    weighted: dict[tuple[str, str], Edge] = {}
    for (a, b), edge in graph.edges.items():
        if edge.count < min_cooccur:
            continue
        pmi = math.log(edge.count * n / (graph.nodes[a] * graph.nodes[b]))
        if pmi <= 0.0:
            continue
        weighted[(a, b)] = Edge(count=edge.count, pmi=pmi)
    return EntityGraph(
        nodes=dict(graph.nodes),
        edges=weighted,
        n_messages=graph.n_messages,
        window=graph.window,
    )


def backbone_filter(graph: EntityGraph, top_k: int = 3) -> EntityGraph:
    """Keep the union over nodes of each node's top-k incident edges.

    Edges rank by PMI descending, then co-occurrence count descending, then
    the pair's lexicographic order. Nodes left without any surviving edge
    are removed. Applying the filter twice changes nothing: every surviving
    edge was in some node's top-k and still is, because each node keeps at
    most its original top-k edges.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if any(edge.pmi is None for edge in graph.edges.values()):
        raise ValueError("backbone_filter needs PMI weights; run pmi_weights first")
    incident: dict[str, list[tuple[str, str]]] = {}
    for pair in graph.edges:
        incident.setdefault(pair[0], []).append(pair)
        incident.setdefault(pair[1], []).append(pair)
    keep: set[tuple[str, str]] = set()
    for node, pairs in incident.items():
        ranked = sorted(
            pairs,
            key=lambda p: (-graph.edges[p].pmi, -graph.edges[p].count, p),
        )
        keep.update(ranked[:top_k])
    kept_edges = {pair: graph.edges[pair] for pair in keep}
    kept_nodes = {
        name: freq
        for name, freq in graph.nodes.items()
        if any(name in pair for pair in kept_edges)
    }
    return EntityGraph(
        nodes=kept_nodes,
        edges=kept_edges,
        n_messages=graph.n_messages,
        window=graph.window,
    )


def _sorted_edges(graph: EntityGraph) -> list[tuple[str, str, Edge]]:
    return [(a, b, graph.edges[(a, b)]) for a, b in sorted(graph.edges)]


def export_graph(graph: EntityGraph, path: str | Path, fmt: str) -> Path:
    """Write the graph as 'dot', 'json', or 'csv'; output is fully sorted
    so identical graphs always serialize to identical bytes."""
    path = Path(path)
    if fmt == "dot":
        _write_dot(graph, path)
    elif fmt == "json":
        _write_json(graph, path)
    elif fmt == "csv":
        _write_csv(graph, path)
    else:
        raise ValueError(f"unknown graph format {fmt!r}")
    return path


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _write_dot(graph: EntityGraph, path: Path) -> None:
    max_freq = max(graph.nodes.values(), default=1)
    weights = [e.pmi for e in graph.edges.values() if e.pmi is not None]
    max_w = max(weights, default=1.0) or 1.0
    lines = ["graph entities {", "  node [shape=circle];"]
    for name in sorted(graph.nodes):
        size = 0.3 + 1.2 * graph.nodes[name] / max_freq
        lines.append(f"  {_dot_quote(name)} [width={size:.3f}, fixedsize=true];")
    for a, b, edge in _sorted_edges(graph):
        w = edge.pmi if edge.pmi is not None else float(edge.count)
        pen = 0.5 + 2.5 * w / max_w
        lines.append(f"  {_dot_quote(a)} -- {_dot_quote(b)} [penwidth={pen:.3f}];")
    lines.append("}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(graph: EntityGraph, path: Path) -> None:
    start, end = graph.window
    payload = {
        "n_messages": graph.n_messages,
        "window": {
            "start": start.isoformat() if start else None,
            "end": end.isoformat() if end else None,
        },
        "nodes": [
            {"id": name, "frequency": graph.nodes[name]} for name in sorted(graph.nodes)
        ],
        "edges": [
            {"source": a, "target": b, "cooccur_count": e.count, "pmi_weight": e.pmi}
            for a, b, e in _sorted_edges(graph)
        ],
    }
    with path.open("w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, ensure_ascii=False, sort_keys=True)
        handle.write("\n")


def _write_csv(graph: EntityGraph, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["entity_a", "entity_b", "cooccur_count", "pmi_weight"])
        for a, b, e in _sorted_edges(graph):
            writer.writerow([a, b, e.count, repr(e.pmi) if e.pmi is not None else ""])
