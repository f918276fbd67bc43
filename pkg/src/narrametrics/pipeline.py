"""Batch pipeline: stage orchestration, caching, and the run manifest.

Stage order is fixed: corpus ingestion, descriptive stats, topics
(per-platform and combined), sentiment, escalation, event correlation
(skipped without event files), entities, report. Each stage writes its
artifacts into the output directory; the normalized corpus is cached under
``<output_dir>/cache`` keyed by a digest of the input files, so individual
subcommands can re-run downstream stages without re-reading raw inputs.

Any stage failure aborts the run with the stage name and cause, after
removing that stage's partial outputs. A completed run writes
``run_manifest.json`` recording config hash, input digests, seed, and
per-stage outputs with timings.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Optional

from narrametrics import corpus, entities, escalation, eventcorr, sentiment, topics, vectorize
from narrametrics.config import PipelineConfig, config_hash
from narrametrics.errors import DataError
from narrametrics.plots import line_chart
from narrametrics.series import DailySeries

logger = logging.getLogger(__name__)

STAGE_ORDER = (
    "ingest",
    "stats",
    "topics",
    "sentiment",
    "escalate",
    "correlate",
    "entities",
    "report",
)


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunContext:
    config: PipelineConfig
    out_dir: Path
    cache_dir: Path
    messages: Optional[list[corpus.Message]] = None
    stages: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def require_messages(self) -> list[corpus.Message]:
        if self.messages is None:
            self.messages = load_cached_corpus(self.cache_dir)
        return self.messages


def _file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_digests(cfg: PipelineConfig) -> dict[str, str]:
    return {p: _file_digest(p) for p in sorted(cfg.inputs)}


def _corpus_cache_name(digests: dict[str, str]) -> str:
    h = hashlib.sha256(json.dumps(digests, sort_keys=True).encode()).hexdigest()[:16]
    return f"corpus-{h}.jsonl"


def load_cached_corpus(cache_dir: Path) -> list[corpus.Message]:
    index_path = cache_dir / "index.json"
    if not index_path.is_file():
        raise DataError("no ingested corpus found; run the 'ingest' subcommand first")
    index = json.loads(index_path.read_text("utf-8"))
    corpus_file = cache_dir / index["corpus"]
    if not corpus_file.is_file():
        raise DataError("corpus cache is stale; run the 'ingest' subcommand first")
    return corpus.load_messages_jsonl(corpus_file)


def _score_all(
    messages: list[corpus.Message],
    lex: sentiment.SentimentLexicon,
    threads: int,
) -> dict[tuple[str, str], sentiment.SentimentScore]:
    """Score every message; result order never depends on thread count."""
    texts = [m.text for m in messages]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = list(pool.map(lambda t: sentiment.score_text(t, lex), texts, chunksize=64))
    else:
        scored = [sentiment.score_text(t, lex) for t in texts]
    return {(m.platform, m.id): s for m, s in zip(messages, scored)}


# ---------------------------------------------------------------- stages


def stage_ingest(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages, reports = corpus.ingest_corpus(cfg.inputs)
    if not messages:
        raise DataError("ingestion produced zero messages")
    ctx.messages = messages
    ctx.cache_dir.mkdir(parents=True, exist_ok=True)
    digests = input_digests(cfg)
    cache_name = _corpus_cache_name(digests)
    corpus.dump_messages_jsonl(messages, ctx.cache_dir / cache_name)
    (ctx.cache_dir / "index.json").write_text(
        json.dumps({"corpus": cache_name, "inputs": digests}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    report_path = ctx.out_dir / "ingest_report.json"
    payload = [
        {
            "path": r.path,
            "lines": r.lines,
            "kept": r.kept,
            "malformed": r.malformed,
            "duplicates_dropped": r.duplicates_dropped,
            "empty_dropped": r.empty_dropped,
        }
        for r in reports
    ]
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [ctx.cache_dir / cache_name, ctx.cache_dir / "index.json", report_path]


def stage_stats(ctx: RunContext) -> list[Path]:
    messages = ctx.require_messages()
    stats = corpus.compute_source_volumes(messages)
    written = [
        corpus.write_length_cdf_csv(stats, ctx.out_dir / "length_cdf.csv"),
        corpus.write_source_volumes_csv(stats, ctx.out_dir / "source_volumes.csv"),
    ]
    volume_series = [("all", corpus.daily_message_counts(messages))]
    for platform in sorted(stats.per_platform):
        volume_series.append((platform, corpus.daily_message_counts(messages, platform)))
    written.append(line_chart(volume_series, "Daily message volume", ctx.out_dir / "daily_volume.svg"))
    return written


def _scope_messages(messages: list[corpus.Message], scope: str) -> list[corpus.Message]:
    if scope == "combined":
        return messages
    return [m for m in messages if m.platform == scope]


def stage_topics(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages = ctx.require_messages()
    stopwords = vectorize.load_stopwords(
        cfg.vectorize.stopwords_path, extra=cfg.vectorize.extra_stopwords
    )
    written: list[Path] = []
    platforms = sorted({m.platform for m in messages})
    for scope in [*platforms, "combined"]:
        scoped = _scope_messages(messages, scope)
        if not scoped:
            ctx.skipped.append({"stage": "topics", "scope": scope, "reason": "no messages"})
            continue
        docs = [vectorize.tokenize(m.text) for m in scoped]
        vocab = vectorize.build_vocabulary(
            docs,
            min_df=cfg.vectorize.min_df,
            max_df_ratio=cfg.vectorize.max_df_ratio,
            stopwords=stopwords,
        )
        dtm = vectorize.tfidf_matrix(docs, vocab)
        k = min(cfg.nmf.k, dtm.n_docs, dtm.n_terms)
        if k < cfg.nmf.k:
            logger.warning("topics[%s]: k reduced from %d to %d for a %dx%d matrix",
                           scope, cfg.nmf.k, k, dtm.n_docs, dtm.n_terms)
        model = topics.nmf_fit(
            dtm, k=k, max_iter=cfg.nmf.max_iter, tol=cfg.nmf.tol, seed=cfg.nmf.seed
        )
        prefix = ctx.out_dir / f"topics_{scope}"
        topics.write_factor_csv(model.W, f"{prefix}_W.csv", "doc")
        topics.write_factor_csv(model.H, f"{prefix}_H.csv", "topic")
        label_terms = min(cfg.topics.label_terms, len(vocab))
        topics.write_labels_json(model, vocab, f"{prefix}_labels.json", m=label_terms)
        written += [Path(f"{prefix}_W.csv"), Path(f"{prefix}_H.csv"), Path(f"{prefix}_labels.json")]
        written.append(
            vectorize.write_vocabulary_csv(vocab, ctx.out_dir / f"vocabulary_{scope}.csv")
        )
        if cfg.vectorize.dump_matrix:
            written.append(
                vectorize.write_matrix_csv(dtm, ctx.out_dir / f"tfidf_{scope}.csv")
            )
        graph = topics.topic_similarity_graph(
            model, cfg.similarity.neighbors_k, cfg.similarity.min_similarity
        )
        topics.write_similarity_dot(graph, f"{prefix}_similarity.dot")
        topics.write_similarity_csv(graph, f"{prefix}_similarity.csv")
        written += [Path(f"{prefix}_similarity.dot"), Path(f"{prefix}_similarity.csv")]

        assignments = topics.assign_topics(model)
        series = topics.topic_volume_series(assignments, scoped, top_n=cfg.topics.top_n)
        volumes_path = ctx.out_dir / f"topic_volumes_{scope}.csv"
        with volumes_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["label", "date", "count"])
            for label in sorted(series):
                for d in series[label].days():
                    writer.writerow([label, d.isoformat(), series[label].counts[d]])
        written.append(volumes_path)
    return written


def stage_sentiment(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages = ctx.require_messages()
    lex = sentiment.load_lexicon(
        cfg.sentiment.lexicon_path, cfg.sentiment.boosters_path, cfg.sentiment.negators_path
    )
    scores = _score_all(messages, lex, cfg.threads)
    written: list[Path] = []
    platforms = sorted({m.platform for m in messages})
    histograms: dict[str, list[tuple[float, int]]] = {}
    smoothed_series: list[tuple[str, DailySeries]] = []
    for platform in platforms:
        scoped = [m for m in messages if m.platform == platform]
        scoped_scores = {m.id: scores[(platform, m.id)] for m in scoped}
        daily = sentiment.daily_sentiment_series(scoped, scoped_scores, cfg.sentiment.min_daily)
        written.append(
            sentiment.write_daily_sentiment_csv(
                daily, ctx.out_dir / f"sentiment_daily_{platform}.csv"
            )
        )
        hist = sentiment.sentiment_histogram(
            list(scoped_scores.values()), bins=cfg.sentiment.hist_bins
        )
        histograms[platform] = hist
        written.append(
            sentiment.write_histogram_csv(hist, ctx.out_dir / f"sentiment_hist_{platform}.csv")
        )
        if daily.values:
            smoothed_series.append(
                (platform, sentiment.rolling_mean(daily, cfg.sentiment.rolling_window))
            )
    if len(histograms) == 2:
        a, b = (histograms[p] for p in platforms)
        written.append(
            sentiment.write_divergence_json(
                sentiment.platform_divergence(a, b),
                cfg.sentiment.hist_bins,
                ctx.out_dir / "divergence.json",
            )
        )
    else:
        ctx.skipped.append(
            {"stage": "sentiment", "artifact": "divergence.json", "reason": "need both platforms"}
        )
    if smoothed_series:
        written.append(
            line_chart(
                smoothed_series,
                f"Mean daily sentiment ({cfg.sentiment.rolling_window}-day rolling mean)",
                ctx.out_dir / "sentiment_smoothed.svg",
            )
        )
    return written


def _config_bundles(cfg: PipelineConfig) -> list[escalation.KeywordBundle]:
    return [
        escalation.KeywordBundle(name, tuple(patterns))
        for name, patterns in sorted(cfg.escalation.bundles.items())
    ]


def stage_escalate(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages = ctx.require_messages()
    bundles = _config_bundles(cfg)
    written: list[Path] = []
    rates_path = ctx.out_dir / "bundle_rates.csv"
    escalation.write_bundle_rates_csv(messages, bundles, rates_path)
    written.append(rates_path)
    rates = escalation.daily_bundle_rates(messages, bundles)
    raw = escalation.composite_index(rates, normalization="none", weights=cfg.escalation.weights)
    norm = eventcorr.minmax_normalize(raw)
    index_path = ctx.out_dir / "escalation_index.csv"
    escalation.write_escalation_index_csv(raw, norm, index_path)
    written.append(index_path)
    written.append(
        line_chart(sorted(rates.items()), "Daily bundle rates", ctx.out_dir / "bundle_rates.svg")
    )
    smooth = sentiment.rolling_mean(raw, cfg.escalation.smooth_window)
    written.append(
        line_chart(
            [("composite", raw), (f"{cfg.escalation.smooth_window}-day mean", smooth)],
            "Composite escalation index",
            ctx.out_dir / "escalation_index.svg",
        )
    )
    return written


def stage_correlate(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    if not cfg.events:
        ctx.skipped.append({"stage": "correlate", "reason": "no event files configured"})
        return []
    messages = ctx.require_messages()
    bundles = _config_bundles(cfg)
    rates = escalation.daily_bundle_rates(messages, bundles)
    signal = escalation.composite_index(rates, normalization="none", weights=cfg.escalation.weights)
    if cfg.correlation.zero_fill:
        signal = eventcorr.zero_fill(signal)
    written: list[Path] = []
    multi = len(cfg.events) > 1
    timeline_series: list[tuple[str, DailySeries]] = [("signal", eventcorr.minmax_normalize(signal))]
    for event_path in cfg.events:
        ev = eventcorr.load_event_series(event_path)
        events_series = eventcorr.zero_fill(ev.series) if cfg.correlation.zero_fill else ev.series
        suffix = f"_{ev.label}" if multi else ""
        result = eventcorr.lag_scan(
            signal,
            events_series,
            max_lag=cfg.correlation.max_lag,
            min_overlap=cfg.correlation.min_overlap,
        )
        lag_path = ctx.out_dir / f"lag_correlation{suffix}.csv"
        eventcorr.write_lag_csv(result, lag_path)
        timeline_path = ctx.out_dir / f"timeline_normalized{suffix}.csv"
        eventcorr.write_timeline_csv(signal, events_series, timeline_path)
        scatter_path = ctx.out_dir / f"scatter{suffix}.csv"
        eventcorr.write_scatter_csv(signal, events_series, scatter_path)
        written += [lag_path, timeline_path, scatter_path]
        timeline_series.append((ev.label, eventcorr.minmax_normalize(events_series)))
    written.append(
        line_chart(timeline_series, "Normalized signal and events", ctx.out_dir / "event_timeline.svg")
    )
    return written


def stage_entities(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages = ctx.require_messages()
    if cfg.entities.annotations_path:
        annotations = entities.load_entity_annotations(cfg.entities.annotations_path)
        extractor = entities.annotation_extractor(annotations)
        gaz = None
    else:
        gaz = entities.load_gazetteer(cfg.entities.gazetteer_path)
        extractor = None
    window = (
        date.fromisoformat(cfg.entities.date_start) if cfg.entities.date_start else None,
        date.fromisoformat(cfg.entities.date_end) if cfg.entities.date_end else None,
    )
    graph = entities.cooccurrence_counts(
        messages, gazetteer=gaz, date_filter=window, extractor=extractor
    )
    weighted = entities.pmi_weights(graph, min_cooccur=cfg.entities.min_cooccur)
    backbone = entities.backbone_filter(weighted, top_k=cfg.entities.backbone_k)
    return [
        entities.export_graph(backbone, ctx.out_dir / "entity_graph.dot", "dot"),
        entities.export_graph(backbone, ctx.out_dir / "entity_graph.json", "json"),
        entities.export_graph(backbone, ctx.out_dir / "entity_edges.csv", "csv"),
    ]


def _require_artifact(ctx: RunContext, name: str, producer: str) -> Path:
    path = ctx.out_dir / name
    if not path.is_file():
        raise DataError(f"missing artifact {name}; run the {producer!r} subcommand first")
    return path


def stage_report(ctx: RunContext) -> list[Path]:
    cfg = ctx.config
    messages = ctx.require_messages()
    summary: dict = {
        "corpus": {
            "messages": len(messages),
            "platforms": {
                p: sum(1 for m in messages if m.platform == p)
                for p in sorted({m.platform for m in messages})
            },
        }
    }
    divergence_path = ctx.out_dir / "divergence.json"
    if divergence_path.is_file():
        summary["divergence"] = json.loads(divergence_path.read_text("utf-8"))
    top_topics: dict = {}
    for labels_path in sorted(ctx.out_dir.glob("topics_*_labels.json")):
        scope = labels_path.name[len("topics_") : -len("_labels.json")]
        top_topics[scope] = json.loads(labels_path.read_text("utf-8"))
    if not top_topics:
        raise DataError("missing artifact topics_*_labels.json; run the 'topics' subcommand first")
    summary["topics"] = top_topics
    _require_artifact(ctx, "escalation_index.csv", "escalate")
    lag_files = sorted(ctx.out_dir.glob("lag_correlation*.csv"))
    best_lags: dict = {}
    for lag_path in lag_files:
        rows = lag_path.read_text("utf-8").splitlines()[1:]
        parsed = [
            (int(r.split(",")[0]), float(r.split(",")[1]), float(r.split(",")[2]))
            for r in rows
        ]
        best_r = min(parsed, key=lambda t: (-abs(t[1]), t[0]))
        best_rho = min(parsed, key=lambda t: (-abs(t[2]), t[0]))
        label = lag_path.stem[len("lag_correlation") :].lstrip("_") or "events"
        best_lags[label] = {
            "best_lag_pearson": best_r[0],
            "pearson": best_r[1],
            "best_lag_spearman": best_rho[0],
            "spearman": best_rho[2],
        }
    if best_lags:
        summary["best_lags"] = best_lags
    path = ctx.out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path]


_STAGE_FUNCS: dict[str, Callable[[RunContext], list[Path]]] = {
    "ingest": stage_ingest,
    "stats": stage_stats,
    "topics": stage_topics,
    "sentiment": stage_sentiment,
    "escalate": stage_escalate,
    "correlate": stage_correlate,
    "entities": stage_entities,
    "report": stage_report,
}


def run_stage(ctx: RunContext, name: str) -> list[Path]:
    """Run one stage, recording outputs and timing; on failure remove the
    files the stage managed to write and re-raise as StageError."""
    func = _STAGE_FUNCS[name]
    started = time.perf_counter()
    try:
        outputs = func(ctx)
    except Exception as exc:
        for leftover in _candidate_outputs(ctx, name):
            leftover.unlink(missing_ok=True)
        raise StageError(name, exc) from exc
    ctx.stages.append(
        {
            "name": name,
            "outputs": sorted(str(p.relative_to(ctx.out_dir)) for p in outputs),
            "seconds": round(time.perf_counter() - started, 6),
        }
    )
    return outputs


def _candidate_outputs(ctx: RunContext, name: str) -> list[Path]:
    patterns = {
        "ingest": ["ingest_report.json"],
        "stats": ["length_cdf.csv", "source_volumes.csv", "daily_volume.svg"],
        "topics": ["topics_*", "vocabulary_*.csv", "topic_volumes_*.csv", "tfidf_*.csv"],
        "sentiment": ["sentiment_*", "divergence.json"],
        "escalate": ["bundle_rates.*", "escalation_index.*"],
        "correlate": ["lag_correlation*.csv", "timeline_normalized*.csv", "scatter*.csv", "event_timeline.svg"],
        "entities": ["entity_graph.*", "entity_edges.csv"],
        "report": ["summary.json"],
    }
    found: list[Path] = []
    for pattern in patterns.get(name, []):
        found.extend(ctx.out_dir.glob(pattern))
    return found


def write_manifest(ctx: RunContext, seed: int) -> Path:
    digests = input_digests(ctx.config)
    # event files are inputs too; digest them for the record, but keep them
    # out of input_digests() itself, which keys the corpus cache
    for p in sorted(ctx.config.events):
        if Path(p).is_file():
            digests[p] = _file_digest(p)
    manifest = {
        "config_hash": config_hash(ctx.config),
        "input_digests": digests,
        "seed": seed,
        "threads": ctx.config.threads,
        "stages": ctx.stages,
        "skipped": ctx.skipped,
    }
    path = ctx.out_dir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_pipeline(cfg: PipelineConfig, stages: Optional[list[str]] = None) -> RunContext:
    """Run the requested stages (default: all) in canonical order."""
    requested = list(STAGE_ORDER) if stages is None else stages
    bad = [s for s in requested if s not in _STAGE_FUNCS]
    if bad:
        raise ValueError(f"unknown stages: {bad}")
    ordered = [s for s in STAGE_ORDER if s in requested]
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config=cfg, out_dir=out_dir, cache_dir=out_dir / "cache")
    for name in ordered:
        run_stage(ctx, name)
    write_manifest(ctx, seed=cfg.nmf.seed)
    return ctx
