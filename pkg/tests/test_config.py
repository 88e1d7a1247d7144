import json

import pytest

from calltriage.config import (
    ServiceConfig,
    apply_flat_keys,
    env_overrides,
    load_config,
    tunable_snapshot,
)


class TestFlatKeys:
    def test_channel_keys(self):
        cfg = apply_flat_keys(ServiceConfig(), {"channel.p_random": 0.1, "channel.seed": 9})
        assert cfg.channel.p_random == 0.1
        assert cfg.channel.seed == 9

    def test_triage_and_priority_keys(self):
        cfg = apply_flat_keys(
            ServiceConfig(),
            {
                "triage.w_keyword": 0.6,
                "triage.w_emotion": 0.2,
                "triage.w_context": 0.2,
                "priority.w_severity": 0.8,
                "priority.w_frequency": 0.1,
                "priority.w_distress": 0.1,
            },
        )
        assert cfg.severity_weights.w_keyword == 0.6
        assert cfg.priority_weights.w_severity == 0.8

    def test_keyword_lists(self):
        cfg = apply_flat_keys(
            ServiceConfig(),
            {"triage.severe_keywords": ["gun", "BLAZE"], "triage.mild_keywords": ["noise"]},
        )
        assert cfg.rules.severe == frozenset({"gun", "blaze"})

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            apply_flat_keys(ServiceConfig(), {"triage.w_keyword": 0.9})

    def test_unknown_key_rejected(self):
        with pytest.raises(KeyError):
            apply_flat_keys(ServiceConfig(), {"nonsense.key": 1})

    def test_partial_update_keeps_other_fields(self):
        base = ServiceConfig()
        cfg = apply_flat_keys(base, {"priority.w_severity": 0.7, "priority.w_frequency": 0.2, "priority.w_distress": 0.1})
        assert cfg.severity_weights == base.severity_weights
        assert cfg.rules == base.rules


class TestLoadConfig:
    def test_defaults_resolve_packaged_data(self):
        cfg = ServiceConfig()
        assert cfg.corpus_path.endswith("corpus.csv")
        assert cfg.scenario_path("fire").exists()

    def test_file_then_env_precedence(self, tmp_path, monkeypatch):
        path = tmp_path / "svc.json"
        path.write_text(json.dumps({"channel.p_random": 0.2, "listen.api_port": 9999}))
        cfg = load_config(path, environ={"TRIAGE_CHANNEL_P_RANDOM": "0.3"})
        assert cfg.channel.p_random == 0.3  # env wins
        assert cfg.api_port == 9999

    def test_env_mapping_handles_underscored_fields(self):
        flat = env_overrides({"TRIAGE_CHANNEL_BURST_ENTER": "0.1", "IGNORED": "x"})
        assert flat == {"channel.burst_enter": "0.1"}

    def test_missing_corpus_rejected(self, tmp_path):
        path = tmp_path / "svc.json"
        path.write_text(json.dumps({"corpus.path": str(tmp_path / "nope.csv")}))
        with pytest.raises(FileNotFoundError):
            load_config(path)

    def test_non_object_config_rejected(self, tmp_path):
        path = tmp_path / "svc.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError):
            load_config(path)


def test_tunable_snapshot_round_trips():
    cfg = ServiceConfig()
    snap = tunable_snapshot(cfg)
    again = apply_flat_keys(cfg, snap)
    assert tunable_snapshot(again) == snap
