"""TOML configuration for the batch pipeline.

Every analysis knob lives here with a sane default, so a minimal config is
just an ``inputs`` list. Validation happens eagerly at load time: missing
files, out-of-range parameters, and malformed bundle tables all raise
ConfigError before any stage runs.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from narrametrics.errors import ConfigError
from narrametrics.escalation import DEFAULT_BUNDLES


@dataclass
class VectorizeConfig:
    min_df: int = 2
    max_df_ratio: float = 0.95
    extra_stopwords: list[str] = field(default_factory=list)
    stopwords_path: Optional[str] = None
    dump_matrix: bool = False


@dataclass
class NmfConfig:
    k: int = 20
    max_iter: int = 400
    tol: float = 1e-5
    seed: int = 0


@dataclass
class TopicsConfig:
    top_n: int = 5
    label_terms: int = 10


@dataclass
class SimilarityConfig:
    neighbors_k: int = 3
    min_similarity: float = 0.1


@dataclass
class SentimentConfig:
    min_daily: int = 10
    rolling_window: int = 14
    hist_bins: int = 40
    lexicon_path: Optional[str] = None
    boosters_path: Optional[str] = None
    negators_path: Optional[str] = None


@dataclass
class EscalationConfig:
    bundles: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_BUNDLES.items()}
    )
    weights: dict[str, float] = field(default_factory=dict)
    normalization: str = "minmax"
    smooth_window: int = 14


@dataclass
class CorrelationConfig:
    max_lag: int = 14
    min_overlap: int = 3
    zero_fill: bool = False


@dataclass
class EntitiesConfig:
    min_cooccur: int = 2
    backbone_k: int = 3
    gazetteer_path: Optional[str] = None
    annotations_path: Optional[str] = None
    date_start: Optional[str] = None
    date_end: Optional[str] = None


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    output_dir: str = "out"
    threads: int = 1
    vectorize: VectorizeConfig = field(default_factory=VectorizeConfig)
    nmf: NmfConfig = field(default_factory=NmfConfig)
    topics: TopicsConfig = field(default_factory=TopicsConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    sentiment: SentimentConfig = field(default_factory=SentimentConfig)
    escalation: EscalationConfig = field(default_factory=EscalationConfig)
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    entities: EntitiesConfig = field(default_factory=EntitiesConfig)

    def resolved(self) -> dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "vectorize": VectorizeConfig,
    "nmf": NmfConfig,
    "topics": TopicsConfig,
    "similarity": SimilarityConfig,
    "sentiment": SentimentConfig,
    "escalation": EscalationConfig,
    "correlation": CorrelationConfig,
    "entities": EntitiesConfig,
}

_TOP_KEYS = {"inputs", "events", "output_dir", "threads"} | set(_SECTIONS)


def _apply_section(target: Any, table: dict, section: str) -> None:
    valid = set(target.__dataclass_fields__)
    for key, value in table.items():
        if key not in valid:
            raise ConfigError(f"unknown key {section}.{key!r} (valid: {sorted(valid)})")
        expected = type(getattr(target, key))
        # TOML ints are fine where floats are expected; None fields accept str
        if getattr(target, key) is None:
            if not isinstance(value, str):
                raise ConfigError(f"{section}.{key} must be a path string")
        elif expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        elif not isinstance(value, expected) or isinstance(value, bool) is not (expected is bool):
            raise ConfigError(
                f"{section}.{key} must be {expected.__name__}, got {type(value).__name__}"
            )
        setattr(target, key, value)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a TOML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")

    cfg = PipelineConfig()
    for key in ("inputs", "events"):
        value = raw.get(key, [])
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key} must be a list of path strings")
        setattr(cfg, key, value)
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            raise ConfigError("output_dir must be a string")
        cfg.output_dir = raw["output_dir"]
    if "threads" in raw:
        if not isinstance(raw["threads"], int) or isinstance(raw["threads"], bool):
            raise ConfigError("threads must be an integer")
        cfg.threads = raw["threads"]

    for section, _ in _SECTIONS.items():
        table = raw.get(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        if section == "escalation":
            _load_escalation(cfg.escalation, table)
        else:
            _apply_section(getattr(cfg, section), table, section)

    # resolve paths relative to the config file's directory
    base = path.parent
    cfg.inputs = [str((base / p).resolve()) if not Path(p).is_absolute() else p for p in cfg.inputs]
    cfg.events = [str((base / p).resolve()) if not Path(p).is_absolute() else p for p in cfg.events]
    if not Path(cfg.output_dir).is_absolute():
        cfg.output_dir = str((base / cfg.output_dir).resolve())
    for section, attr in (
        ("sentiment", "lexicon_path"),
        ("sentiment", "boosters_path"),
        ("sentiment", "negators_path"),
        ("vectorize", "stopwords_path"),
        ("entities", "gazetteer_path"),
        ("entities", "annotations_path"),
    ):
        value = getattr(getattr(cfg, section), attr)
        if value is not None and not Path(value).is_absolute():
            setattr(getattr(cfg, section), attr, str((base / value).resolve()))

    validate_config(cfg)
    return cfg


def _load_escalation(target: EscalationConfig, table: dict) -> None:
    for key, value in table.items():
        if key == "bundles":
            if not isinstance(value, dict):
                raise ConfigError("escalation.bundles must be a table of name -> pattern list")
            bundles: dict[str, list[str]] = {}
            for name, patterns in value.items():
                if not isinstance(patterns, list) or not all(isinstance(p, str) for p in patterns):
                    raise ConfigError(f"escalation.bundles.{name} must be a list of strings")
                bundles[name] = patterns
            target.bundles = bundles
        elif key == "weights":
            if not isinstance(value, dict) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value.values()
            ):
                raise ConfigError("escalation.weights must map bundle names to numbers")
            target.weights = {k: float(v) for k, v in value.items()}
        elif key == "normalization":
            if value not in ("none", "minmax"):
                raise ConfigError("escalation.normalization must be 'none' or 'minmax'")
            target.normalization = value
        elif key == "smooth_window":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError("escalation.smooth_window must be an integer")
            target.smooth_window = value
        else:
            raise ConfigError(f"unknown key escalation.{key!r}")


def validate_config(cfg: PipelineConfig) -> None:
    if not cfg.inputs:
        raise ConfigError("config needs at least one entry in 'inputs'")
    for p in cfg.inputs + cfg.events:
        if not Path(p).is_file():
            raise ConfigError(f"referenced path does not exist: {p}")
    for section, attr in (
        ("sentiment", "lexicon_path"),
        ("sentiment", "boosters_path"),
        ("sentiment", "negators_path"),
        ("vectorize", "stopwords_path"),
        ("entities", "gazetteer_path"),
        ("entities", "annotations_path"),
    ):
        value = getattr(getattr(cfg, section), attr)
        if value is not None and not Path(value).is_file():
            raise ConfigError(f"{section}.{attr} does not exist: {value}")

    checks = [
        (cfg.threads >= 1, "threads must be >= 1"),
        (cfg.vectorize.min_df >= 1, "vectorize.min_df must be >= 1"),
        (0.0 < cfg.vectorize.max_df_ratio <= 1.0, "vectorize.max_df_ratio must be in (0, 1]"),
        (cfg.nmf.k >= 1, "nmf.k must be >= 1"),
        (cfg.nmf.max_iter >= 1, "nmf.max_iter must be >= 1"),
        (cfg.nmf.tol >= 0.0, "nmf.tol must be >= 0"),
        (cfg.nmf.seed >= 0, "nmf.seed must be >= 0"),
        (cfg.topics.top_n >= 1, "topics.top_n must be >= 1"),
        (cfg.topics.label_terms >= 1, "topics.label_terms must be >= 1"),
        (cfg.similarity.neighbors_k >= 1, "similarity.neighbors_k must be >= 1"),
        (-1.0 <= cfg.similarity.min_similarity <= 1.0, "similarity.min_similarity must be in [-1, 1]"),
        (cfg.sentiment.min_daily >= 1, "sentiment.min_daily must be >= 1"),
        (cfg.sentiment.rolling_window >= 1, "sentiment.rolling_window must be >= 1"),
        (cfg.sentiment.hist_bins >= 2, "sentiment.hist_bins must be >= 2"),
        (cfg.escalation.smooth_window >= 1, "escalation.smooth_window must be >= 1"),
        (cfg.correlation.max_lag >= 0, "correlation.max_lag must be >= 0"),
        (cfg.correlation.min_overlap >= 3, "correlation.min_overlap must be >= 3"),
        (cfg.entities.min_cooccur >= 1, "entities.min_cooccur must be >= 1"),
        (cfg.entities.backbone_k >= 1, "entities.backbone_k must be >= 1"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    if not cfg.escalation.bundles:
        raise ConfigError("escalation.bundles must not be empty")
    unknown_weights = set(cfg.escalation.weights) - set(cfg.escalation.bundles)
    if unknown_weights:
        raise ConfigError(f"escalation.weights refer to unknown bundles: {sorted(unknown_weights)}")
    for name, patterns in cfg.escalation.bundles.items():
        if not patterns:
            raise ConfigError(f"escalation bundle {name!r} has no patterns")
    from datetime import date as _date

    for attr in ("date_start", "date_end"):
        value = getattr(cfg.entities, attr)
        if value is not None:
            try:
                _date.fromisoformat(value)
            except ValueError:
                raise ConfigError(f"entities.{attr} must be an ISO date, got {value!r}") from None


def config_hash(cfg: PipelineConfig) -> str:
    """Stable digest of the fully resolved configuration.

    ``output_dir`` and ``threads`` are excluded: neither changes artifact
    content, so the same analysis hashes the same wherever and however
    parallel it ran.
    """
    resolved = cfg.resolved()
    resolved.pop("output_dir", None)
    resolved.pop("threads", None)
    canonical = json.dumps(resolved, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
