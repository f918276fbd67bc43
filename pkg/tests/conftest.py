"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest

from narrametrics.corpus import Message, ingest_corpus

DATA_DIR = Path(__file__).resolve().parent / "data"

FIXTURE_CORPUS = DATA_DIR / "fixture_corpus.jsonl"
FIXTURE_EVENTS = DATA_DIR / "fixture_events.csv"
FIXTURE_CONFIG = DATA_DIR / "fixture_config.toml"
SENTIMENT_FIXTURE = DATA_DIR / "sentiment_fixture.json"


def ts(year: int, month: int, day: int, hour: int = 12, minute: int = 0) -> int:
    return int(datetime(year, month, day, hour, minute, tzinfo=timezone.utc).timestamp())


def mk_msg(
    id: str = "m1",
    text: str = "hello world",
    platform: str = "telegram",
    source: str = "chan",
    kind: str = "message",
    created_utc: int = ts(2025, 6, 1),
) -> Message:
    return Message(
        id=id,
        platform=platform,
        source=source,
        kind=kind,
        created_utc=created_utc,
        text=text,
        raw_length=len(text),
    )


@pytest.fixture(scope="session")
def fixture_messages():
    messages, _ = ingest_corpus([FIXTURE_CORPUS])
    return messages


@pytest.fixture(scope="session")
def fixture_reports():
    _, reports = ingest_corpus([FIXTURE_CORPUS])
    return reports
