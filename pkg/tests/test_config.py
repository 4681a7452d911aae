"""Tests for config parsing, serialization, and hashing."""
import json

import pytest

from monosde.config import (ConfigError, config_hash, get_value, load_config,
                            parse_config_text, require_positive,
                            serialize_config)


def test_parse_dotted_keys_and_types():
    cfg = parse_config_text(
        "problem.name = fig1\n"
        "scheme.delta = 0.05\n"
        "# a comment line\n"
        "run.n_paths = 1000\n"
        "flags.fast = true\n"
        "order.deltas = [0.2, 0.1, 0.05]\n")
    assert cfg["problem.name"] == "fig1"
    assert cfg["scheme.delta"] == 0.05
    assert cfg["run.n_paths"] == 1000
    assert cfg["flags.fast"] is True
    assert cfg["order.deltas"] == [0.2, 0.1, 0.05]


def test_parse_quoted_strings():
    cfg = parse_config_text('label = "a b c"\n')
    assert cfg["label"] == "a b c"


def test_duplicate_key_rejected_with_line():
    with pytest.raises(ConfigError, match="line"):
        parse_config_text("a = 1\na = 2\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("just some words\n")


def test_round_trip_is_lossless():
    cfg = {"problem.name": "fig1", "scheme.delta": 0.05,
           "run.x0": -3.5, "order.deltas": [0.2, 0.1], "flags.on": False,
           "run.n_paths": 4096}
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_round_trip_preserves_float_precision():
    cfg = {"a.b": 0.1 + 0.2, "c.d": 1e-300}
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_load_config_text_and_json(tmp_path):
    p1 = tmp_path / "run.cfg"
    p1.write_text("problem.name = ou\nscheme.delta = 0.1\n")
    assert load_config(p1)["problem.name"] == "ou"

    p2 = tmp_path / "run.json"
    p2.write_text(json.dumps({"problem": {"name": "ou"}, "scheme": {"delta": 0.1}}))
    cfg = load_config(p2)
    assert cfg["problem.name"] == "ou"
    assert cfg["scheme.delta"] == 0.1


def test_config_hash_ignores_thread_count():
    cfg = {"problem.name": "fig1", "run.threads": 1}
    assert config_hash(cfg) == config_hash({**cfg, "run.threads": 16})
    assert config_hash(cfg) != config_hash({**cfg, "problem.name": "ou"})


def test_get_value_casts_and_reports_key():
    cfg = {"run.n_paths": "512"}
    assert get_value(cfg, "run.n_paths", cast=int) == 512
    assert get_value(cfg, "run.horizon", 10.0, float) == 10.0
    with pytest.raises(ConfigError, match="run.missing"):
        get_value(cfg, "run.missing")
    with pytest.raises(ConfigError, match="run.n_paths"):
        get_value({"run.n_paths": "abc"}, "run.n_paths", cast=int)


def test_require_positive():
    require_positive({"k": 1}, "k", 1.0)
    with pytest.raises(ConfigError, match="'k'"):
        require_positive({"k": -1}, "k", -1.0)
