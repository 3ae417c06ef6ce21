import json

import pytest

from barron_risk import config


@pytest.mark.parametrize("command", ["train", "rate-study", "width-sweep", "init-sweep"])
def test_defaults_validate(command):
    cfg = config.resolve(command, {})
    assert cfg["seed"] == 0 and cfg["threads"] == 1


@pytest.mark.parametrize("command,key", [("mnist-bench", "images"), ("bound-report", "model")])
def test_path_keys_required(command, key):
    with pytest.raises(config.ConfigError, match=key):
        config.resolve(command, {})


@pytest.mark.parametrize(
    "user",
    [{"bogus": 1}, {"train": {"T": 10, "momentum": 0.9}}, {"data": {"target": {"kind": "one_neuron", "x": 1}}}],
)
def test_unknown_keys_rejected(user):
    with pytest.raises(config.ConfigError, match="Additional properties"):
        config.resolve("train", user)


def test_type_errors_name_location():
    with pytest.raises(config.ConfigError, match="train/T"):
        config.resolve("train", {"train": {"T": 0}})


def test_rate_study_needs_d_at_least_two():
    with pytest.raises(config.ConfigError):
        config.resolve("rate-study", {"d_list": [1]})


def test_nested_merge_keeps_defaults():
    cfg = config.resolve("train", {"train": {"T": 7}, "data": {"target": {"d": 3}}})
    assert cfg["train"]["T"] == 7
    assert cfg["train"]["base_lr"] == 1e-3
    assert cfg["data"]["target"] == {**config.DEFAULTS["train"]["data"]["target"], "d": 3}
    # defaults are not mutated by resolution
    assert config.DEFAULTS["train"]["train"]["T"] == 2000


def test_hash_ignores_location_and_workers():
    a = config.resolve("train", {"out": "x", "threads": 1})
    b = config.resolve("train", {"out": "y", "threads": 4})
    c = config.resolve("train", {"seed": 1})
    assert config.config_hash(a) == config.config_hash(b)
    assert config.config_hash(a) != config.config_hash(c)


def test_load_errors(tmp_path):
    with pytest.raises(config.ConfigError, match="not found"):
        config.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(config.ConfigError, match="not valid JSON"):
        config.load(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"m": 3}))
    assert config.load(good) == {"m": 3}
