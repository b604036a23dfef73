import json

import pytest

from adaptflow.config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config

MINIMAL = {"algorithm": "dann", "seed": 3, "max_epochs": 2}


def parse(**overrides):
    return parse_config(json.dumps({**MINIMAL, **overrides}))


def test_defaults():
    cfg = parse()
    assert cfg.optimizer.name == "sgd" and cfg.optimizer.lr == 0.01
    assert cfg.scheduler is None
    assert (cfg.dataset.n_per_class, cfg.dataset.n_classes, cfg.dataset.shift_angle_deg) == (200, 3, 45.0)
    assert cfg.validator == "bnm" and cfg.val_interval == 1
    assert cfg.resolved_inference_fn() == "default"
    assert parse(algorithm="mcd").resolved_inference_fn() == "mcd"


def test_round_trip():
    cfg = parse(optimizer={"name": "adam", "lr": 0.003}, scheduler={"gamma": 0.9})
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


@pytest.mark.parametrize("overrides,where", [
    ({"optimiser": {}}, "optimiser"),
    ({"optimizer": {"name": "sgd", "momentum": 0.9}}, "optimizer.momentum"),
    ({"algorithm": "cdan"}, "algorithm"),
    ({"optimizer": {"lr": 0}}, "optimizer.lr"),
    ({"scheduler": {"gamma": 1.5}}, "scheduler.gamma"),
    ({"max_epochs": 0}, "max_epochs"),
    ({"hyperparams": {"mcd_repeat": 0}}, "hyperparams.mcd_repeat"),
    ({"post_hooks": ["bsp"]}, "post_hooks are only supported"),
    ({"inference_fn": "mcd"}, "does not fit"),
    ({"validator": "entropy"}, "validator"),
])
def test_field_diagnostics(overrides, where):
    with pytest.raises(ConfigError, match=where.replace(".", r"\.")):
        parse(**overrides)


def test_seed_required():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(json.dumps({"algorithm": "dann", "max_epochs": 1}))


def test_duplicate_post_hooks():
    with pytest.raises(ConfigError, match="duplicates"):
        parse(algorithm="classifier", post_hooks=["bnm", "bnm"])


def test_json_error_has_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "algorithm": "dann",\n  "seed": 1,,\n}')
    with pytest.raises(ConfigError, match="line 3 column"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_shipped_configs_parse():
    from pathlib import Path

    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.json"))
    assert len(paths) == 6
    for p in paths:
        assert isinstance(load_config(p), ExperimentConfig)
