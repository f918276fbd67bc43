"""Topic modeling via non-negative matrix factorization.

Factorizes a doc-by-term matrix V (n x m) into W (n x k) and H (k x m) with
multiplicative updates minimizing the Frobenius reconstruction error
||V - WH||_F. Updates follow Lee and Seung:

    H <- H * (W^T V) / (W^T W H + eps)
    W <- W * (V H^T) / (W H H^T + eps)

with eps = 1e-12 guarding the divisions. Both factors start from seeded
uniform(0, 1) noise scaled by sqrt(mean(V) / k), so a fixed seed gives
bit-identical factors on every run. The per-iteration error is recorded in
``objective_trace`` and is non-increasing up to floating-point slack.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from narrametrics.errors import DataError
from narrametrics.series import DailySeries
from narrametrics.vectorize import DocTermMatrix, Vocabulary

logger = logging.getLogger(__name__)

EPS = 1e-12

# dominant_topic marker for documents whose W row is entirely zero
UNASSIGNED = -1

MatrixLike = Union[DocTermMatrix, np.ndarray, sparse.spmatrix]


@dataclass
class TopicModel:
    k: int
    W: np.ndarray
    H: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    seed: int = 0


def _as_matrix(V: MatrixLike):
    if isinstance(V, DocTermMatrix):
        return V.matrix
    if sparse.issparse(V):
        return V.tocsr()
    A = np.asarray(V, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    return A


def _frobenius_sq(A) -> float:
    if sparse.issparse(A):
        return float(A.multiply(A).sum())
    return float((A * A).sum())


def nmf_fit(
    V: MatrixLike,
    k: int,
    max_iter: int = 400,
    tol: float = 1e-5,
    seed: int = 0,
) -> TopicModel:
    """Fit a rank-k factorization of the non-negative matrix V.

    Iteration stops after ``max_iter`` rounds or once the relative
    improvement of the objective drops below ``tol``. ``objective_trace``
    holds the error at initialization followed by one entry per completed
    iteration.
    """
    A = _as_matrix(V)
    n_docs, n_terms = A.shape
    if not 1 <= k <= min(n_docs, n_terms):
        raise ValueError(f"k must be in [1, {min(n_docs, n_terms)}] for a {n_docs}x{n_terms} matrix, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if A.min() < 0:
        raise DataError("matrix has negative entries; NMF requires non-negative input")
    mean = float(A.mean())
    if mean <= 0.0:
        raise DataError("degenerate input: matrix is entirely zero")

    rng = np.random.default_rng(seed)
    scale = math.sqrt(mean / k)
    W = rng.uniform(0.0, 1.0, size=(n_docs, k)) * scale
    H = rng.uniform(0.0, 1.0, size=(k, n_terms)) * scale

    v_sq = _frobenius_sq(A)

    def objective(VHt: np.ndarray, HHt: np.ndarray) -> float:
        cross = float((VHt * W).sum())
        gram = float(((W.T @ W) * HHt).sum())
        return math.sqrt(max(v_sq - 2.0 * cross + gram, 0.0))

    trace = [objective(A @ H.T, H @ H.T)]
    for _ in range(max_iter):
        WtV = (A.T @ W).T
        H *= WtV / (W.T @ W @ H + EPS)
        VHt = A @ H.T
        HHt = H @ H.T
        W *= VHt / (W @ HHt + EPS)
        err = objective(VHt, HHt)
        trace.append(err)
        prev = trace[-2]
        if prev <= EPS or (prev - err) < tol * prev:
            break

    return TopicModel(k=k, W=W, H=H, objective_trace=trace, seed=seed)


def dominant_topic(model: TopicModel, doc: int) -> int:
    """Topic with the largest loading for one document.

    Ties resolve to the lowest topic id (np.argmax takes the first
    maximum); a document with an all-zero row gets ``UNASSIGNED``.
    """
    row = model.W[doc]
    if not row.any():
        return UNASSIGNED
    return int(np.argmax(row))


def assign_topics(model: TopicModel) -> list[int]:
    """Dominant topic per document, in document order."""
    return [dominant_topic(model, i) for i in range(model.W.shape[0])]


def top_terms(model: TopicModel, vocab: Vocabulary, m: int) -> list[list[str]]:
    """Top-m terms per topic by descending H weight; ties lexicographic."""
    if not 1 <= m <= len(vocab):
        raise ValueError(f"m must be in [1, {len(vocab)}], got {m}")
    terms = vocab.terms
    out: list[list[str]] = []
    for i in range(model.k):
        weights = model.H[i]
        order = sorted(range(len(terms)), key=lambda j: (-weights[j], terms[j]))
        out.append([terms[j] for j in order[:m]])
    return out


def topic_label(topic: int) -> str:
    return f"topic_{topic}"


def topic_volume_series(
    assignments: Union[Mapping[int, int], Sequence[int]],
    messages: Sequence,
    top_n: int,
) -> dict[str, DailySeries]:
    """Daily message volume per dominant topic.

    Keeps the ``top_n`` topics by total assigned volume as their own series
    (ties break toward the lower topic id) and folds the rest into an
    "Other" series. Documents carrying the unassigned marker are excluded.
    The per-day sums across all returned series equal the daily count of
    assigned messages.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    if isinstance(assignments, Mapping):
        pairs = list(assignments.items())
    else:
        pairs = list(enumerate(assignments))
    if len(pairs) != len(messages):
        raise ValueError(f"{len(pairs)} assignments for {len(messages)} messages")

    totals: dict[int, int] = {}
    for _, topic in pairs:
        if topic != UNASSIGNED:
            totals[topic] = totals.get(topic, 0) + 1
    ranked = sorted(totals, key=lambda t: (-totals[t], t))
    kept = set(ranked[:top_n])

    series: dict[str, DailySeries] = {}
    for doc, topic in pairs:
        if topic == UNASSIGNED:
            continue
        label = topic_label(topic) if topic in kept else "Other"
        day = messages[doc].day
        s = series.setdefault(label, DailySeries())
        s.counts[day] = s.counts.get(day, 0) + 1
    for s in series.values():
        s.values = {d: float(c) for d, c in s.counts.items()}
    return series


@dataclass
class TopicSimilarityGraph:
    """Undirected topic graph; edges are (i, j, cosine) with i < j."""

    nodes: list[tuple[int, str]]
    edges: list[tuple[int, int, float]]
    neighbors_k: int
    min_similarity: float


def _cosine_matrix(H: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(H, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = H / safe[:, None]
    S = unit @ unit.T
    S[norms == 0.0, :] = 0.0
    S[:, norms == 0.0] = 0.0
    return S


def topic_similarity_graph(
    model: TopicModel,
    neighbors_k: int,
    min_similarity: float,
    labels: Optional[Mapping[int, str]] = None,
) -> TopicSimilarityGraph:
    """Connect each topic to its most similar peers.

    For every topic the ``neighbors_k`` highest-cosine other topics with
    similarity at least ``min_similarity`` contribute an edge; the directed
    picks are merged into one undirected edge set. A single-topic model
    yields an empty edge list.
    """
    if neighbors_k < 1:
        raise ValueError(f"neighbors_k must be >= 1, got {neighbors_k}")
    S = _cosine_matrix(model.H)
    k = model.k
    picked: set[tuple[int, int]] = set()
    for i in range(k):
        candidates = sorted((j for j in range(k) if j != i), key=lambda j: (-S[i, j], j))
        for j in candidates[:neighbors_k]:
            if S[i, j] >= min_similarity:
                picked.add((min(i, j), max(i, j)))
    edges = sorted((i, j, float(S[i, j])) for i, j in picked)
    label_of = labels if labels is not None else {}
    nodes = [(i, label_of.get(i, topic_label(i))) for i in range(k)]
    return TopicSimilarityGraph(
        nodes=nodes, edges=edges, neighbors_k=neighbors_k, min_similarity=min_similarity
    )


def write_factor_csv(matrix: np.ndarray, path, prefix: str) -> None:
    """One row per matrix row with a leading id column."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([prefix] + [f"c{j}" for j in range(matrix.shape[1])])
        for i, row in enumerate(matrix):
            writer.writerow([i] + [repr(float(v)) for v in row])


def write_labels_json(model: TopicModel, vocab: Vocabulary, path, m: int = 10) -> None:
    labels = {
        topic_label(i): terms
        for i, terms in enumerate(top_terms(model, vocab, min(m, len(vocab))))
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(labels, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")


def write_similarity_dot(graph: TopicSimilarityGraph, path) -> None:
    lines = ["graph topic_similarity {"]
    for i, label in graph.nodes:
        lines.append(f'  t{i} [label="{label}"];')
    for i, j, sim in graph.edges:
        lines.append(f'  t{i} -- t{j} [weight={sim:.4f}, penwidth={0.5 + 3.0 * sim:.3f}];')
    lines.append("}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def write_similarity_csv(graph: TopicSimilarityGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["topic_a", "topic_b", "cosine"])
        for i, j, sim in graph.edges:
            writer.writerow([i, j, repr(sim)])
