"""Tokenization, vocabulary construction, and TF-IDF weighting.

Two tokenizers live here because two different jobs need them:

``tokenize``
    Analysis tokens for vectorization. Unicode-aware lowercase alphabetic
    runs; digits and punctuation are separators and tokens shorter than two
    characters are dropped. Non-Latin scripts pass through unchanged.

``word_tokens``
    Matching tokens for keyword bundles and gazetteer lookup. Also lowercase
    and Unicode-aware, but keeps digits and single-character tokens so that
    phrase contiguity and short aliases survive ("no fly zone", possessives
    splitting into name + "s").
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from narrametrics.errors import DataError

_WORD_RE = re.compile(r"[^\W\d_]+", re.UNICODE)
_MATCH_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase alphabetic tokens of length >= 2, in text order."""
    return [t for t in _WORD_RE.findall(text.lower()) if len(t) >= 2]


def word_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric tokens with no length filter, in text order."""
    return _MATCH_RE.findall(text.lower())


def load_stopwords(path: Optional[str | Path] = None, extra: Iterable[str] = ()) -> frozenset[str]:
    """Bundled English stopword list, optionally replaced by ``path`` and
    extended with ``extra`` terms (lowercased)."""
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    else:
        text = resources.files("narrametrics.data").joinpath("stopwords_en.txt").read_text("utf-8")
    words = {line.strip().lower() for line in text.splitlines() if line.strip()}
    words.update(w.lower() for w in extra)
    return frozenset(words)


@dataclass
class Vocabulary:
    """Ordered term list with lookup index and document frequencies."""

    terms: list[str]
    index: dict[str, int]
    doc_freq: dict[str, int]

    def __len__(self) -> int:
        return len(self.terms)


def build_vocabulary(
    docs: Sequence[Sequence[str]],
    min_df: int = 2,
    max_df_ratio: float = 0.95,
    stopwords: frozenset[str] = frozenset(),
) -> Vocabulary:
    """Build the term list for a tokenized corpus.

    Terms are kept when their document frequency is at least ``min_df``, at
    most ``max_df_ratio`` of documents, and they are not stopwords. The term
    order is lexicographic, which fixes column order for everything
    downstream.
    """
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    if not 0.0 < max_df_ratio <= 1.0:
        raise ValueError(f"max_df_ratio must be in (0, 1], got {max_df_ratio}")
    if not docs:
        raise DataError("cannot build a vocabulary from zero documents")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(doc))
    n_docs = len(docs)
    terms = sorted(
        t
        for t, n in df.items()
        if n >= min_df and n / n_docs <= max_df_ratio and t not in stopwords
    )
    if not terms:
        raise DataError(
            f"empty vocabulary: no term passed min_df={min_df}, "
            f"max_df_ratio={max_df_ratio} over {n_docs} documents"
        )
    return Vocabulary(
        terms=terms,
        index={t: i for i, t in enumerate(terms)},
        doc_freq={t: df[t] for t in terms},
    )


@dataclass
class DocTermMatrix:
    """Sparse doc-by-term weight matrix (CSR) plus its provenance knobs."""

    n_docs: int
    n_terms: int
    matrix: sparse.csr_matrix
    row_norm: str = "l2"

    def entries(self) -> Iterable[tuple[int, int, float]]:
        """(doc, term, weight) triples in row-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            yield int(coo.row[i]), int(coo.col[i]), float(coo.data[i])


def idf_vector(vocab: Vocabulary, n_docs: int) -> np.ndarray:
    """idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1, always positive."""
    df = np.array([vocab.doc_freq[t] for t in vocab.terms], dtype=np.float64)
    return np.log((1.0 + n_docs) / (1.0 + df)) + 1.0


def tfidf_matrix(
    docs: Sequence[Sequence[str]],
    vocab: Vocabulary,
    row_norm: str = "l2",
) -> DocTermMatrix:
    """TF-IDF weights with raw term counts and L2 row normalization.

    Rows for documents containing no vocabulary term are all zero and stay
    that way (no normalization is attempted on them).
    """
    if row_norm not in ("l2", "none"):
        raise ValueError(f"row_norm must be 'l2' or 'none', got {row_norm!r}")
    n_docs = len(docs)
    n_terms = len(vocab)
    idf = idf_vector(vocab, n_docs)
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    for row, doc in enumerate(docs):
        counts: Counter[int] = Counter()
        for token in doc:
            j = vocab.index.get(token)
            if j is not None:
                counts[j] += 1
        if not counts:
            continue
        weights = {j: tf * idf[j] for j, tf in counts.items()}
        if row_norm == "l2":
            norm = math.sqrt(sum(w * w for w in weights.values()))
            weights = {j: w / norm for j, w in weights.items()}
        for j in sorted(weights):
            rows.append(row)
            cols.append(j)
            data.append(weights[j])
    matrix = sparse.csr_matrix(
        (np.array(data), (np.array(rows, dtype=np.int32), np.array(cols, dtype=np.int32)))
        if data
        else ([], ([], [])),
        shape=(n_docs, n_terms),
        dtype=np.float64,
    )
    return DocTermMatrix(n_docs=n_docs, n_terms=n_terms, matrix=matrix, row_norm=row_norm)


def write_vocabulary_csv(vocab: Vocabulary, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["term_id", "term", "doc_freq"])
        for i, term in enumerate(vocab.terms):
            writer.writerow([i, term, vocab.doc_freq[term]])
    return path


def write_matrix_csv(dtm: DocTermMatrix, path: str | Path) -> Path:
    """Dump the matrix as (doc, term, weight) triples for debugging."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["doc", "term", "weight"])
        for doc, term, weight in dtm.entries():
            writer.writerow([doc, term, repr(weight)])
    return path
