"""Service configuration.

One flat key-value file (JSON object whose keys are dotted paths) drives
every tunable: channel defaults, triage rules and weights, priority
weights, intent lexicons, backend selection, and listen addresses.
Environment variables with the TRIAGE_ prefix override file keys. Triage
and priority parameters are hot-reloadable through the config endpoint.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .netsim import ChannelConfig
from .prioritizer import PriorityWeights
from .triage import DEFAULT_EMOTION_LEXICONS, DEFAULT_RULES, KeywordRules, SeverityWeights

ENV_PREFIX = "TRIAGE_"

DEFAULT_INTENT_LABELS = ("fire", "medical", "crime", "nuisance")
DEFAULT_INTENT_LEXICONS = {
    "fire": ["fire", "smoke", "burning", "flames", "blaze"],
    "medical": ["ambulance", "bleeding", "pain", "unresponsive", "breathing", "hurt", "fell"],
    "crime": ["gun", "shooting", "gunshot", "stabbing", "kidnapped", "robbery", "killing", "shot"],
    "nuisance": ["noise", "neighbor", "barking", "dog", "cat", "bicycle", "pet"],
}


def packaged_data_dir() -> Path:
    return Path(resources.files("calltriage") / "data")


@dataclass
class ServiceConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    rules: KeywordRules = DEFAULT_RULES
    severity_weights: SeverityWeights = field(default_factory=SeverityWeights)
    priority_weights: PriorityWeights = field(default_factory=PriorityWeights)
    intent_labels: tuple[str, ...] = DEFAULT_INTENT_LABELS
    intent_lexicons: dict = field(default_factory=lambda: dict(DEFAULT_INTENT_LEXICONS))
    emotion_lexicons: dict = field(default_factory=lambda: dict(DEFAULT_EMOTION_LEXICONS))
    stt_backend: str = "mock"  # "mock" | "live"
    generator_backend: str = "mock"  # "mock" | "live"
    generator_base_url: str = ""
    generator_model: str = "gpt-3.5-turbo"
    corpus_path: str = ""
    scenario_dir: str = ""
    media_port: int = 8765
    api_port: int = 8080

    def __post_init__(self):
        data = packaged_data_dir()
        if not self.corpus_path:
            self.corpus_path = str(data / "corpus.csv")
        if not self.scenario_dir:
            self.scenario_dir = str(data / "scenarios")

    def scenario_path(self, name: str) -> Path:
        return Path(self.scenario_dir) / f"{name}.json"


# Dotted key -> (section, field) for the flat config file. Channel, triage
# and priority keys map straight onto their dataclass fields.
_CHANNEL_KEYS = {
    f"channel.{name}": name
    for name in (
        "p_random",
        "burst_enter",
        "burst_exit",
        "burst_loss",
        "delay_mean_ms",
        "jitter_std_ms",
        "bandwidth_avail_kbps",
        "per_call_kbps",
        "seed",
    )
}
_TRIAGE_KEYS = {
    f"triage.{name}": name
    for name in ("w_keyword", "w_emotion", "w_context", "theta_high", "theta_mid")
}
_PRIORITY_KEYS = {
    f"priority.{name}": name for name in ("w_severity", "w_frequency", "w_distress")
}
_PLAIN_KEYS = (
    "stt.backend",
    "generator.backend",
    "generator.base_url",
    "generator.model",
    "corpus.path",
    "scenario.dir",
    "listen.media_port",
    "listen.api_port",
)


def known_keys() -> list[str]:
    return [
        *_CHANNEL_KEYS,
        *_TRIAGE_KEYS,
        *_PRIORITY_KEYS,
        "triage.severe_keywords",
        "triage.mild_keywords",
        "intents.labels",
        *(f"intents.lexicon.{label}" for label in DEFAULT_INTENT_LABELS),
        *_PLAIN_KEYS,
    ]


def apply_flat_keys(cfg: ServiceConfig, flat: dict) -> ServiceConfig:
    """Build a new ServiceConfig with the given dotted keys applied."""
    channel_kw, triage_kw, priority_kw = {}, {}, {}
    severe = set(cfg.rules.severe)
    mild = set(cfg.rules.mild)
    labels = list(cfg.intent_labels)
    lexicons = {k: list(v) for k, v in cfg.intent_lexicons.items()}
    plain: dict = {}

    for key, value in flat.items():
        if key in _CHANNEL_KEYS:
            channel_kw[_CHANNEL_KEYS[key]] = value
        elif key in _TRIAGE_KEYS:
            triage_kw[_TRIAGE_KEYS[key]] = float(value)
        elif key in _PRIORITY_KEYS:
            priority_kw[_PRIORITY_KEYS[key]] = float(value)
        elif key == "triage.severe_keywords":
            severe = {str(v).lower() for v in _as_list(value)}
        elif key == "triage.mild_keywords":
            mild = {str(v).lower() for v in _as_list(value)}
        elif key == "intents.labels":
            labels = [str(v) for v in _as_list(value)]
        elif key.startswith("intents.lexicon."):
            lexicons[key.removeprefix("intents.lexicon.")] = [str(v) for v in _as_list(value)]
        elif key in _PLAIN_KEYS:
            plain[key] = value
        else:
            raise KeyError(f"unknown config key {key!r}")

    channel = replace(cfg.channel, **_coerce_channel(channel_kw)) if channel_kw else cfg.channel
    sw = cfg.severity_weights
    severity = (
        SeverityWeights(
            w_keyword=triage_kw.get("w_keyword", sw.w_keyword),
            w_emotion=triage_kw.get("w_emotion", sw.w_emotion),
            w_context=triage_kw.get("w_context", sw.w_context),
            theta_high=triage_kw.get("theta_high", sw.theta_high),
            theta_mid=triage_kw.get("theta_mid", sw.theta_mid),
        )
        if triage_kw
        else sw
    )
    pw = cfg.priority_weights
    priority = (
        PriorityWeights(
            w_severity=priority_kw.get("w_severity", pw.w_severity),
            w_frequency=priority_kw.get("w_frequency", pw.w_frequency),
            w_distress=priority_kw.get("w_distress", pw.w_distress),
        )
        if priority_kw
        else pw
    )

    return ServiceConfig(
        channel=channel,
        rules=KeywordRules(severe=frozenset(severe), mild=frozenset(mild)),
        severity_weights=severity,
        priority_weights=priority,
        intent_labels=tuple(labels),
        intent_lexicons=lexicons,
        emotion_lexicons=cfg.emotion_lexicons,
        stt_backend=str(plain.get("stt.backend", cfg.stt_backend)),
        generator_backend=str(plain.get("generator.backend", cfg.generator_backend)),
        generator_base_url=str(plain.get("generator.base_url", cfg.generator_base_url)),
        generator_model=str(plain.get("generator.model", cfg.generator_model)),
        corpus_path=str(plain.get("corpus.path", cfg.corpus_path)),
        scenario_dir=str(plain.get("scenario.dir", cfg.scenario_dir)),
        media_port=int(plain.get("listen.media_port", cfg.media_port)),
        api_port=int(plain.get("listen.api_port", cfg.api_port)),
    )


def _as_list(value) -> list:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _coerce_channel(kw: dict) -> dict:
    out = {}
    for name, value in kw.items():
        out[name] = int(value) if name == "seed" else float(value)
    return out


def env_overrides(environ=None) -> dict:
    """TRIAGE_-prefixed env vars mapped back onto known dotted keys."""
    environ = os.environ if environ is None else environ
    lookup = {key.replace(".", "_").upper(): key for key in known_keys()}
    flat = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = lookup.get(name.removeprefix(ENV_PREFIX))
        if key is not None:
            flat[key] = value
    return flat


def load_config(path: str | Path | None = None, environ=None) -> ServiceConfig:
    """Defaults, then the file's flat keys, then env overrides."""
    cfg = ServiceConfig()
    if path is not None:
        flat = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(flat, dict):
            raise ValueError("config file must be a JSON object of dotted keys")
        cfg = apply_flat_keys(cfg, flat)
    overrides = env_overrides(environ)
    if overrides:
        cfg = apply_flat_keys(cfg, overrides)
    if not Path(cfg.corpus_path).exists():
        raise FileNotFoundError(f"corpus file not found: {cfg.corpus_path}")
    return cfg


def tunable_snapshot(cfg: ServiceConfig) -> dict:
    """The hot-reloadable subset, as flat keys (what GET /config returns)."""
    sw, pw = cfg.severity_weights, cfg.priority_weights
    return {
        "triage.w_keyword": sw.w_keyword,
        "triage.w_emotion": sw.w_emotion,
        "triage.w_context": sw.w_context,
        "triage.theta_high": sw.theta_high,
        "triage.theta_mid": sw.theta_mid,
        "triage.severe_keywords": sorted(cfg.rules.severe),
        "triage.mild_keywords": sorted(cfg.rules.mild),
        "priority.w_severity": pw.w_severity,
        "priority.w_frequency": pw.w_frequency,
        "priority.w_distress": pw.w_distress,
    }
