"""Corpus ingestion and descriptive statistics.

Reads JSONL dumps produced by platform crawlers, normalizes each record into
a :class:`Message`, and computes the descriptive statistics used by the
reporting stage (length CDF, per-source volumes, daily message counts).

Each JSONL line must carry ``id``, ``platform``, ``source``, ``kind``,
``created_utc`` and ``text``; unknown extra keys are ignored. Lines that are
not valid JSON or fail field validation are counted as malformed rather than
aborting the run. Duplicate ``(platform, id)`` pairs are dropped so that
ingesting a file concatenated with itself yields the same message set as
ingesting it once.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from narrametrics.errors import DataError
from narrametrics.series import DailySeries

PLATFORMS = ("telegram", "reddit")
KINDS = ("message", "post", "comment")

_URL_RE = re.compile(r"https?://\S+")


@dataclass(frozen=True, slots=True)
class Message:
    """One normalized message. ``raw_length`` is the character count of the
    preprocessed text (URL removal and whitespace collapse happen first)."""

    id: str
    platform: str
    source: str
    kind: str
    created_utc: int
    text: str
    raw_length: int

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.created_utc, tz=timezone.utc).date()


@dataclass
class IngestReport:
    """Per-file ingestion accounting. ``lines`` covers every line seen."""

    path: str
    lines: int = 0
    kept: int = 0
    malformed: int = 0
    duplicates_dropped: int = 0
    empty_dropped: int = 0


def preprocess_text(raw: str) -> str:
    """Strip URLs, collapse runs of whitespace, trim. Idempotent."""
    without_urls = _URL_RE.sub(" ", raw)
    return " ".join(without_urls.split())


def _parse_record(obj: dict, platform_hint: Optional[str]) -> Optional[tuple[str, str, str, str, int, str]]:
    """Validate one decoded JSON object; None if any field fails."""
    if not isinstance(obj, dict):
        return None
    msg_id = obj.get("id")
    if not isinstance(msg_id, str) or not msg_id:
        return None
    platform = obj.get("platform", platform_hint)
    if platform not in PLATFORMS:
        return None
    source = obj.get("source")
    if not isinstance(source, str) or not source:
        return None
    kind = obj.get("kind")
    if kind not in KINDS:
        return None
    created = obj.get("created_utc")
    # crawlers emit ints or integral floats; bools are not timestamps
    if isinstance(created, bool) or not isinstance(created, (int, float)):
        return None
    if created <= 0 or float(created) != int(created):
        return None
    text = obj.get("text")
    if not isinstance(text, str):
        return None
    return msg_id, platform, source, kind, int(created), text


def ingest_jsonl(
    path: str | Path,
    platform_hint: Optional[str] = None,
    _seen: Optional[set[tuple[str, str]]] = None,
) -> tuple[list[Message], IngestReport]:
    """Ingest one JSONL file.

    ``platform_hint`` fills in the platform for records that omit the field.
    Returns the kept messages in file order plus an :class:`IngestReport`.
    """
    path = Path(path)
    report = IngestReport(path=str(path))
    seen = _seen if _seen is not None else set()
    messages: list[Message] = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            report.lines += 1
            stripped = line.strip()
            if not stripped:
                report.empty_dropped += 1
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError:
                report.malformed += 1
                continue
            parsed = _parse_record(obj, platform_hint)
            if parsed is None:
                report.malformed += 1
                continue
            msg_id, platform, source, kind, created, raw_text = parsed
            text = preprocess_text(raw_text)
            if not text:
                report.empty_dropped += 1
                continue
            key = (platform, msg_id)
            if key in seen:
                report.duplicates_dropped += 1
                continue
            seen.add(key)
            messages.append(
                Message(
                    id=msg_id,
                    platform=platform,
                    source=source,
                    kind=kind,
                    created_utc=created,
                    text=text,
                    raw_length=len(text),
                )
            )
            report.kept += 1
    return messages, report


def ingest_corpus(
    paths: Sequence[str | Path],
    platform_hint: Optional[str] = None,
) -> tuple[list[Message], list[IngestReport]]:
    """Ingest several files as one corpus.

    Files are processed in sorted path order so that any parallel or
    re-ordered invocation produces an identical result; duplicates are
    dropped across file boundaries (first occurrence in path order wins).
    """
    if not paths:
        raise DataError("no input files given")
    seen: set[tuple[str, str]] = set()
    messages: list[Message] = []
    reports: list[IngestReport] = []
    for path in sorted(paths, key=str):
        msgs, report = ingest_jsonl(path, platform_hint=platform_hint, _seen=seen)
        messages.extend(msgs)
        reports.append(report)
    return messages, reports


@dataclass
class CorpusStats:
    """Descriptive statistics over an ingested corpus.

    ``source_platform`` maps each source name to the platform it appeared on
    (sources live on exactly one platform in practice; on a collision the
    first platform in message order wins and volumes are still summed per
    (platform, source) for CSV export via ``by_platform_source``).
    """

    total_items: int
    per_platform: dict[str, int]
    per_source: dict[str, int]
    by_platform_source: dict[tuple[str, str], int]
    source_platform: dict[str, str]
    length_cdf: list[tuple[int, float]]
    source_volume_cdf: dict[str, list[tuple[int, float]]]


def compute_length_cdf(messages: Sequence[Message]) -> list[tuple[int, float]]:
    """Empirical CDF of message character lengths.

    Returns (length, cumulative_fraction) pairs at each distinct observed
    length, sorted ascending; the final fraction is exactly 1.0.
    """
    if not messages:
        raise DataError("empty corpus: no messages to summarize")
    length_counts = Counter(m.raw_length for m in messages)
    total = len(messages)
    cdf: list[tuple[int, float]] = []
    cumulative = 0
    for length in sorted(length_counts):
        cumulative += length_counts[length]
        cdf.append((length, cumulative / total))
    return cdf


def _ecdf_int(values: Iterable[int]) -> list[tuple[int, float]]:
    counts = Counter(values)
    total = sum(counts.values())
    out: list[tuple[int, float]] = []
    cum = 0
    for v in sorted(counts):
        cum += counts[v]
        out.append((v, cum / total))
    return out


def compute_source_volumes(messages: Sequence[Message]) -> CorpusStats:
    """Full corpus statistics: platform/source counts plus both CDFs."""
    if not messages:
        raise DataError("empty corpus: no messages to summarize")
    per_platform: Counter[str] = Counter()
    by_ps: Counter[tuple[str, str]] = Counter()
    source_platform: dict[str, str] = {}
    for m in messages:
        per_platform[m.platform] += 1
        by_ps[(m.platform, m.source)] += 1
        source_platform.setdefault(m.source, m.platform)
    per_source: Counter[str] = Counter()
    for (_, source), n in by_ps.items():
        per_source[source] += n
    source_volume_cdf = {
        platform: _ecdf_int(n for (p, _), n in by_ps.items() if p == platform)
        for platform in sorted(per_platform)
    }
    return CorpusStats(
        total_items=len(messages),
        per_platform=dict(per_platform),
        per_source=dict(per_source),
        by_platform_source=dict(by_ps),
        source_platform=source_platform,
        length_cdf=compute_length_cdf(messages),
        source_volume_cdf=source_volume_cdf,
    )


def top_sources(stats: CorpusStats, platform: str, n: int) -> list[tuple[str, int]]:
    """Top-n sources for a platform by volume; ties break by name ascending."""
    pairs = [(s, c) for (p, s), c in stats.by_platform_source.items() if p == platform]
    pairs.sort(key=lambda item: (-item[1], item[0]))
    return pairs[:n]


def daily_message_counts(
    messages: Sequence[Message],
    platform_filter: Optional[str] = None,
) -> DailySeries:
    """Messages per UTC day. Days with no messages are simply absent."""
    series = DailySeries()
    for m in messages:
        if platform_filter is not None and m.platform != platform_filter:
            continue
        d = m.day
        series.counts[d] = series.counts.get(d, 0) + 1
    series.values = {d: float(c) for d, c in series.counts.items()}
    return series


def write_length_cdf_csv(stats: CorpusStats, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["length", "cumulative_fraction"])
        for length, fraction in stats.length_cdf:
            writer.writerow([length, repr(fraction)])
    return path


def write_source_volumes_csv(stats: CorpusStats, path: str | Path) -> Path:
    path = Path(path)
    rows = sorted(stats.by_platform_source.items())
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["platform", "source", "count"])
        for (platform, source), count in rows:
            writer.writerow([platform, source, count])
    return path


def dump_messages_jsonl(messages: Sequence[Message], path: str | Path) -> Path:
    """Write normalized messages back out as JSONL (the cache format)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        for m in messages:
            handle.write(
                json.dumps(
                    {
                        "id": m.id,
                        "platform": m.platform,
                        "source": m.source,
                        "kind": m.kind,
                        "created_utc": m.created_utc,
                        "text": m.text,
                        "raw_length": m.raw_length,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )
    return path


def load_messages_jsonl(path: str | Path) -> list[Message]:
    """Load messages written by :func:`dump_messages_jsonl`. Strict: the
    cache is produced by this package, so any bad line is an error."""
    path = Path(path)
    messages: list[Message] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                messages.append(
                    Message(
                        id=obj["id"],
                        platform=obj["platform"],
                        source=obj["source"],
                        kind=obj["kind"],
                        created_utc=obj["created_utc"],
                        text=obj["text"],
                        raw_length=obj["raw_length"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"corrupt corpus cache at {path} line {lineno}: {exc}") from exc
    return messages
