"""Batch analytics for cross-platform message corpora.

The package turns JSONL dumps of Telegram channels and subreddits into a set
of reproducible artifacts: corpus statistics, NMF topic models, daily
sentiment series, keyword-bundle escalation indices, lagged correlations
against external event series, and PMI-weighted entity co-occurrence
networks. Everything is seeded and deterministic; the ``narrametrics`` CLI
drives the full pipeline from a TOML config.
"""

from narrametrics.corpus import IngestReport, Message, ingest_corpus, ingest_jsonl, preprocess_text
from narrametrics.errors import ConfigError, DataError
from narrametrics.series import DailySeries

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DailySeries",
    "DataError",
    "IngestReport",
    "Message",
    "__version__",
    "ingest_corpus",
    "ingest_jsonl",
    "preprocess_text",
]
