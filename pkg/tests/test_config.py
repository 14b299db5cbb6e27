from __future__ import annotations

import json
from decimal import Decimal

import pytest

from mimo.config import EngineConfig, parse_backend_flag, resolve_config
from mimo.costs import PricingTable
from mimo.errors import ConfigError


def test_defaults_are_coherent():
    config = EngineConfig()
    assert config.temperature == 0.0  # decoding temperature pinned by default
    assert config.max_revisions == 3
    assert config.max_steps == 12
    assert config.k == 5 and config.n == 3
    assert config.pricing == PricingTable()


def test_scripted_backend_requires_path():
    with pytest.raises(ConfigError):
        EngineConfig(backend="scripted")
    EngineConfig(backend="scripted", script_path="s.ndjson")


def test_temperature_must_be_non_negative():
    with pytest.raises(ConfigError):
        EngineConfig(temperature=-0.5)


def test_limits_validated_through_config():
    with pytest.raises(ConfigError):
        EngineConfig(max_revisions=8, max_steps=9)


def test_n_must_not_exceed_k():
    with pytest.raises(ConfigError):
        EngineConfig(n=6, k=5)


def test_parse_backend_flag():
    assert parse_backend_flag("live") == {"backend": "live"}
    assert parse_backend_flag("scripted:x.ndjson") == {
        "backend": "scripted",
        "script_path": "x.ndjson",
    }
    with pytest.raises(ConfigError):
        parse_backend_flag("scripted:")
    with pytest.raises(ConfigError):
        parse_backend_flag("carrier-pigeon")


def test_precedence_flags_over_file_over_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"n": 2, "seed": 5, "model_name": "file-model"}))
    config = resolve_config(str(path), {"n": 4})
    assert config.n == 4  # flag wins
    assert config.seed == 5  # file wins over default
    assert config.model_name == "file-model"
    assert config.k == 5  # default


def test_unknown_config_keys_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"banana": 1}))
    with pytest.raises(ConfigError):
        resolve_config(str(path), {})


def test_pricing_round_trips_through_config_dict():
    config = EngineConfig(pricing=PricingTable(input_token_price=Decimal("0.00005")))
    snapshot = config.to_dict()
    assert snapshot["pricing"]["input_token_price"] == "0.00005"
    restored = PricingTable.from_dict(snapshot["pricing"])
    assert restored == config.pricing


def test_config_snapshot_is_json_serializable():
    snapshot = EngineConfig().to_dict()
    encoded = json.dumps(snapshot, sort_keys=True)
    assert json.loads(encoded)["temperature"] == 0.0
