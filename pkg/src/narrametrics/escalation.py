"""Keyword-bundle matching and the composite escalation index.

A bundle is a named set of lowercase keywords and phrases. Matching is
token-based: single words must appear as whole tokens ("strike" never fires
on "strikingly") and phrases must appear as contiguous token runs. A message
counts at most once per bundle however many of its patterns occur. Daily
rates divide matching messages by total messages on that day; the composite
index averages bundle rates (optionally weighted) and can be min-max
normalized to [0, 1].
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from narrametrics.series import DailySeries
from narrametrics.vectorize import word_tokens

logger = logging.getLogger(__name__)

DEFAULT_BUNDLES: dict[str, tuple[str, ...]] = {
    "military": ("strike", "missile", "troops", "attack", "deployment", "idf", "airstrike"),
    "nuclear": ("nuclear", "enrichment", "uranium", "centrifuge", "iaea"),
    "diplomacy": ("talks", "negotiation", "sanctions", "deal", "ceasefire", "envoy"),
    "escalation": ("escalation", "retaliation", "war", "conflict", "mobilization"),
}


@dataclass(frozen=True)
class KeywordBundle:
    """Named pattern set; patterns are stored lowercase and deduplicated."""

    name: str
    patterns: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("bundle name must be non-empty")
        cleaned = []
        seen = set()
        for p in self.patterns:
            norm = " ".join(p.lower().split())
            if not norm:
                raise ValueError(f"bundle {self.name!r} has an empty pattern")
            if norm not in seen:
                seen.add(norm)
                cleaned.append(norm)
        if not cleaned:
            raise ValueError(f"bundle {self.name!r} has no patterns")
        object.__setattr__(self, "patterns", tuple(cleaned))


def default_bundles() -> list[KeywordBundle]:
    return [KeywordBundle(name, patterns) for name, patterns in DEFAULT_BUNDLES.items()]


def _pattern_tokens(bundle: KeywordBundle) -> tuple[set[str], list[tuple[str, ...]]]:
    words: set[str] = set()
    phrases: list[tuple[str, ...]] = []
    for pattern in bundle.patterns:
        parts = tuple(pattern.split())
        if len(parts) == 1:
            words.add(parts[0])
        else:
            phrases.append(parts)
    return words, phrases


def _tokens_match(tokens: Sequence[str], words: set[str], phrases: Sequence[tuple[str, ...]]) -> bool:
    if words and not words.isdisjoint(tokens):
        return True
    for phrase in phrases:
        span = len(phrase)
        for i in range(len(tokens) - span + 1):
            if tuple(tokens[i : i + span]) == phrase:
                return True
    return False


def match_bundle(message, bundle: KeywordBundle) -> bool:
    """True when any pattern of the bundle occurs in the message text.

    Accepts either a message object or a bare string.
    """
    text = message if isinstance(message, str) else message.text
    words, phrases = _pattern_tokens(bundle)
    return _tokens_match(word_tokens(text), words, phrases)


def daily_bundle_hits(
    messages: Sequence,
    bundles: Sequence[KeywordBundle],
) -> tuple[dict[str, dict], dict]:
    """Integer hit counts per bundle per UTC day plus daily totals."""
    names = [b.name for b in bundles]
    if len(set(names)) != len(names):
        raise ValueError("bundle names must be unique")
    compiled = [(b.name, *_pattern_tokens(b)) for b in bundles]
    hits: dict[str, dict] = {b.name: {} for b in bundles}
    totals: dict = {}
    for m in messages:
        d = m.day
        totals[d] = totals.get(d, 0) + 1
        tokens = word_tokens(m.text)
        for name, words, phrases in compiled:
            if _tokens_match(tokens, words, phrases):
                per_day = hits[name]
                per_day[d] = per_day.get(d, 0) + 1
    return hits, totals


def daily_bundle_rates(
    messages: Sequence,
    bundles: Sequence[KeywordBundle],
) -> dict[str, DailySeries]:
    """Per-bundle daily rates: matching messages / total messages that day.

    Every day with any message appears in every bundle's series (a day
    without matches simply has rate 0.0); days without messages are absent.
    """
    hits, totals = daily_bundle_hits(messages, bundles)
    out: dict[str, DailySeries] = {}
    for name in hits:
        series = DailySeries()
        for d, total in totals.items():
            series.values[d] = hits[name].get(d, 0) / total
            series.counts[d] = total
        out[name] = series
    return out


@dataclass
class EscalationIndex:
    per_bundle_rates: dict[str, DailySeries]
    composite: DailySeries
    normalization: str = "none"
    weights: dict[str, float] = field(default_factory=dict)


def composite_index(
    rates: Mapping[str, DailySeries],
    normalization: str = "none",
    weights: Optional[Mapping[str, float]] = None,
) -> DailySeries:
    """Weighted mean of bundle rates on days covered by every bundle.

    All weights default to 1.0 (plain mean). With ``normalization="minmax"``
    the composite is affinely mapped to [0, 1]; a constant composite maps to
    all zeros with a warning. Min-max is order-preserving, so the argmax day
    survives normalization.
    """
    if normalization not in ("none", "minmax"):
        raise ValueError(f"normalization must be 'none' or 'minmax', got {normalization!r}")
    if not rates:
        raise ValueError("composite_index needs at least one bundle series")
    w = {name: 1.0 for name in rates}
    if weights:
        unknown = set(weights) - set(rates)
        if unknown:
            raise ValueError(f"weights refer to unknown bundles: {sorted(unknown)}")
        w.update({k: float(v) for k, v in weights.items()})
    if any(v < 0 for v in w.values()):
        raise ValueError("bundle weights must be non-negative")
    total_w = sum(w.values())
    if total_w <= 0:
        raise ValueError("bundle weights sum to zero")

    day_sets = [set(series.values) for series in rates.values()]
    common = set.intersection(*day_sets) if day_sets else set()
    composite = DailySeries()
    for d in sorted(common):
        composite.values[d] = (
            sum(w[name] * series.values[d] for name, series in rates.items()) / total_w
        )
        composite.counts[d] = max(series.counts.get(d, 0) for series in rates.values())
    if normalization == "minmax":
        composite = _minmax(composite)
    return composite


def _minmax(series: DailySeries) -> DailySeries:
    # local import keeps layering one-way (eventcorr owns the public version)
    from narrametrics.eventcorr import minmax_normalize

    return minmax_normalize(series)


def build_escalation_index(
    messages: Sequence,
    bundles: Sequence[KeywordBundle],
    normalization: str = "none",
    weights: Optional[Mapping[str, float]] = None,
) -> EscalationIndex:
    rates = daily_bundle_rates(messages, bundles)
    composite = composite_index(rates, normalization=normalization, weights=weights)
    return EscalationIndex(
        per_bundle_rates=rates,
        composite=composite,
        normalization=normalization,
        weights=dict(weights or {}),
    )


def write_bundle_rates_csv(
    messages: Sequence,
    bundles: Sequence[KeywordBundle],
    path,
) -> None:
    """bundle_rates.csv rows: date, bundle, hits, total, rate."""
    hits, totals = daily_bundle_hits(messages, bundles)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "bundle", "hits", "total", "rate"])
        for d in sorted(totals):
            for name in sorted(hits):
                h = hits[name].get(d, 0)
                total = totals[d]
                writer.writerow([d.isoformat(), name, h, total, repr(h / total)])


def write_escalation_index_csv(raw: DailySeries, normalized: DailySeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["date", "composite_raw", "composite_norm"])
        for d in raw.days():
            writer.writerow([d.isoformat(), repr(raw.values[d]), repr(normalized.values[d])])
