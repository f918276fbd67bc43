"""Rule-based sentiment scoring and daily aggregation.

The scorer follows the published VADER procedure restricted to a fixed
heuristic set: lexicon valence, a three-token booster window (damped by
1.0 / 0.95 / 0.9 with distance), tri-gram negation that multiplies the
valence by -0.74, all-caps emphasis of +/- 0.733 when a message mixes
cases, exclamation amplification of 0.292 per mark up to four, and the
compound normalization s / sqrt(s^2 + 15). Question-mark amplification,
clause reweighting around "but", and multi-word idioms are intentionally
out of scope. The lexicon ships as TSV data and can be replaced wholesale
through configuration.

Daily aggregation buckets messages by UTC day, drops days below a minimum
message count, and offers a trailing calendar-window rolling mean plus
fixed-bin histograms compared across platforms with Jensen-Shannon
divergence (log base 2).
"""

from __future__ import annotations

import csv
import json
import math
import string
from dataclasses import dataclass
from datetime import timedelta
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from narrametrics.errors import DataError
from narrametrics.series import DailySeries

_BOOSTER_DAMPING = (1.0, 0.95, 0.9)
_NEGATION_SCALAR = -0.74
_CAPS_EMPHASIS = 0.733
_EXCLAIM_EMPHASIS = 0.292
_MAX_EXCLAIM = 4
_COMPOUND_ALPHA = 15.0

_PUNCT = string.punctuation


@dataclass(frozen=True, slots=True)
class SentimentScore:
    compound: float
    pos: float
    neu: float
    neg: float


@dataclass
class SentimentLexicon:
    """Valence table plus booster increments and negation words."""

    valence: dict[str, float]
    boosters: dict[str, float]
    negators: frozenset[str]


def _read_tsv_map(text: str, what: str) -> dict[str, float]:
    table: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"bad {what} line {lineno}: expected 'token<TAB>value'")
        try:
            table[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise DataError(f"bad {what} value on line {lineno}: {parts[1]!r}") from exc
    if not table:
        raise DataError(f"{what} table is empty")
    return table


def load_lexicon(
    valence_path: Optional[str | Path] = None,
    boosters_path: Optional[str | Path] = None,
    negators_path: Optional[str | Path] = None,
) -> SentimentLexicon:
    """Load the bundled lexicon, with any table replaceable by path."""

    def read(name: str, override: Optional[str | Path]) -> str:
        if override is not None:
            return Path(override).read_text(encoding="utf-8")
        return resources.files("narrametrics.data").joinpath(name).read_text("utf-8")

    valence = _read_tsv_map(read("sentiment_lexicon.tsv", valence_path), "lexicon")
    boosters = _read_tsv_map(read("sentiment_boosters.tsv", boosters_path), "booster")
    negators = frozenset(
        line.strip()
        for line in read("sentiment_negators.txt", negators_path).splitlines()
        if line.strip()
    )
    return SentimentLexicon(valence=valence, boosters=boosters, negators=negators)


def _scoring_tokens(text: str) -> list[str]:
    """Whitespace tokens with surrounding punctuation removed, case kept."""
    out = []
    for raw in text.split():
        token = raw.strip(_PUNCT)
        if token:
            out.append(token)
    return out


def _mixed_case(tokens: Sequence[str]) -> bool:
    upper = sum(1 for t in tokens if t.isupper())
    return 0 < upper < len(tokens)


def _is_negator(token_lower: str, lexicon: SentimentLexicon) -> bool:
    return token_lower in lexicon.negators or "n't" in token_lower


def _adjusted_valence(tokens: Sequence[str], i: int, lexicon: SentimentLexicon, cap_diff: bool) -> float:
    token = tokens[i]
    valence = lexicon.valence[token.lower()]
    if token.isupper() and cap_diff:
        valence += _CAPS_EMPHASIS if valence > 0 else -_CAPS_EMPHASIS
    for dist in (1, 2, 3):
        j = i - dist
        if j < 0:
            continue
        prev_lower = tokens[j].lower()
        # words carrying their own valence neither boost nor negate
        if prev_lower in lexicon.valence:
            continue
        scalar = lexicon.boosters.get(prev_lower, 0.0)
        if scalar != 0.0:
            if valence < 0:
                scalar = -scalar
            if tokens[j].isupper() and cap_diff:
                scalar += _CAPS_EMPHASIS if valence > 0 else -_CAPS_EMPHASIS
            valence += scalar * _BOOSTER_DAMPING[dist - 1]
        if _is_negator(prev_lower, lexicon):
            valence *= _NEGATION_SCALAR
    return valence


def score_text(text: str, lexicon: SentimentLexicon) -> SentimentScore:
    """Score one preprocessed message.

    Text with no tokens at all is fully neutral (neu = 1) so that the
    pos + neu + neg = 1 invariant holds for every input.
    """
    tokens = _scoring_tokens(text)
    if not tokens:
        return SentimentScore(compound=0.0, pos=0.0, neu=1.0, neg=0.0)
    cap_diff = _mixed_case(tokens)

    valences: list[float] = []
    for i, token in enumerate(tokens):
        low = token.lower()
        if low in lexicon.boosters or low not in lexicon.valence:
            valences.append(0.0)
        else:
            valences.append(_adjusted_valence(tokens, i, lexicon, cap_diff))

    emphasis = min(text.count("!"), _MAX_EXCLAIM) * _EXCLAIM_EMPHASIS
    total_valence = math.fsum(valences)
    if total_valence > 0:
        total_valence += emphasis
    elif total_valence < 0:
        total_valence -= emphasis
    compound = total_valence / math.sqrt(total_valence * total_valence + _COMPOUND_ALPHA)

    pos_sum = math.fsum(v + 1.0 for v in valences if v > 0)
    neg_sum = math.fsum(v - 1.0 for v in valences if v < 0)
    neu_count = float(sum(1 for v in valences if v == 0.0))
    if pos_sum > abs(neg_sum):
        pos_sum += emphasis
    elif pos_sum < abs(neg_sum):
        neg_sum -= emphasis
    total = pos_sum + abs(neg_sum) + neu_count
    return SentimentScore(
        compound=compound,
        pos=abs(pos_sum / total),
        neu=neu_count / total,
        neg=abs(neg_sum / total),
    )


def daily_sentiment_series(
    messages: Sequence,
    scores: Mapping[str, SentimentScore],
    min_daily: int = 10,
) -> DailySeries:
    """Mean compound per UTC day, keeping days with at least ``min_daily``
    scored messages. Messages without an entry in ``scores`` are ignored,
    which lets callers score platform slices independently."""
    if min_daily < 1:
        raise ValueError(f"min_daily must be >= 1, got {min_daily}")
    sums: dict = {}
    counts: dict = {}
    for m in messages:
        score = scores.get(m.id)
        if score is None:
            continue
        d = m.day
        sums[d] = sums.get(d, 0.0) + score.compound
        counts[d] = counts.get(d, 0) + 1
    series = DailySeries()
    for d, n in counts.items():
        if n >= min_daily:
            series.values[d] = sums[d] / n
            series.counts[d] = n
    return series


def rolling_mean(series: DailySeries, window_days: int = 14) -> DailySeries:
    """Trailing calendar-window mean.

    The value at day d averages the series values inside [d - window + 1, d].
    Calendar gaps contribute nothing (no implicit zeros), and output days are
    exactly the input days, each of which has at least its own observation.
    """
    if window_days < 1:
        raise ValueError(f"window_days must be >= 1, got {window_days}")
    out = DailySeries()
    for d in series.days():
        window = [
            series.values[d - timedelta(days=back)]
            for back in range(window_days)
            if d - timedelta(days=back) in series.values
        ]
        out.values[d] = math.fsum(window) / len(window)
        out.counts[d] = len(window)
    return out


def sentiment_histogram(scores: Sequence, bins: int = 40) -> list[tuple[float, int]]:
    """Histogram of compound scores over [-1, 1] with uniform bins.

    Every bin is closed on the left and open on the right except the last,
    which also includes +1, so counts always sum to the number of scores.
    Returns (bin_center, count) pairs.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    width = 2.0 / bins
    counts = [0] * bins
    for s in scores:
        c = s.compound if isinstance(s, SentimentScore) else float(s)
        if not -1.0 <= c <= 1.0:
            raise DataError(f"compound score {c} outside [-1, 1]")
        idx = min(int((c + 1.0) / width), bins - 1)
        counts[idx] += 1
    return [(-1.0 + (i + 0.5) * width, counts[i]) for i in range(bins)]


def platform_divergence(
    hist_a: Sequence[tuple[float, int]],
    hist_b: Sequence[tuple[float, int]],
) -> float:
    """Jensen-Shannon divergence (log base 2) between two histograms.

    Histograms must share their binning; each must contain at least one
    observation. Identical distributions give 0, disjoint ones give 1.
    """
    if len(hist_a) != len(hist_b):
        raise ValueError(f"mismatched binning: {len(hist_a)} vs {len(hist_b)} bins")
    centers_a = np.array([c for c, _ in hist_a])
    centers_b = np.array([c for c, _ in hist_b])
    if not np.allclose(centers_a, centers_b, rtol=0.0, atol=1e-12):
        raise ValueError("mismatched binning: bin centers differ")
    p = np.array([n for _, n in hist_a], dtype=np.float64)
    q = np.array([n for _, n in hist_b], dtype=np.float64)
    if p.sum() <= 0 or q.sum() <= 0:
        raise DataError("cannot compare an empty histogram")
    p /= p.sum()
    q /= q.sum()
    m = 0.5 * (p + q)

    def kl(a: np.ndarray, b: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def write_daily_sentiment_csv(series: DailySeries, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "mean_compound", "n_messages"])
        for d in series.days():
            writer.writerow([d.isoformat(), repr(series.values[d]), series.counts[d]])
    return path


def write_histogram_csv(hist: Sequence[tuple[float, int]], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["bin_center", "count"])
        for center, count in hist:
            writer.writerow([repr(center), count])
    return path


def write_divergence_json(value: float, bins: int, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(
            {"jensen_shannon_divergence": value, "log_base": 2, "bins": bins},
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")
    return path
