# =============================================================
# Tests — app/config.py
# =============================================================

import json
import os
import sys

import pytest

from app._paths import APP_ROOT, TOY1_DIR
from app.config import EFFECTIVE_CONFIG_NAME, load_config, save_effective_config
from app.errors import ConfigError, UnsupportedRegime


def write_config(tmp_path, **changes):
    """Config TOY-1 dengan path absolut; changes menimpa / menambah key."""
    data = {
        "vocab": os.path.join(TOY1_DIR, "vocab.tsv"),
        "tokeniser": os.path.join(TOY1_DIR, "tokeniser.tsv"),
        "lm": {"tabular": os.path.join(TOY1_DIR, "lm.tsv")},
        "scheme": "bow",
        "exact": True,
        "out_dir": "out",
    }
    data.update(changes)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_fixture_config_resolves_relative_paths(toy1_config):
    config = load_config(toy1_config)
    assert config.vocab == os.path.join(TOY1_DIR, "vocab.tsv")
    assert config.tabular_path == os.path.join(TOY1_DIR, "lm.tsv")
    assert config.out_dir == os.path.join(APP_ROOT, "out", "toy1")
    assert config.scheme == "bow" and config.exact
    assert config.endpoint is None
    assert config.source == os.path.abspath(toy1_config)
    assert config.lm_order == 2


def test_defaults_fill_missing_keys(tmp_path):
    config = load_config(write_config(tmp_path))
    assert config.seed == 0
    assert config.tolerance == 1e-10
    assert config.bits is False
    assert config.model_name == "model"
    assert config.lm_order is None
    assert config.out_dir == str(tmp_path / "out")


def test_overrides(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = load_config(write_config(tmp_path), {"seed": 7, "tolerance": None, "out_dir": "runs", "bits": True})
    assert config.seed == 7
    assert config.tolerance == 1e-10
    assert config.out_dir == str(tmp_path / "runs")
    assert config.bits is True
    with pytest.raises(ConfigError, match="cannot be overridden"):
        load_config(write_config(tmp_path), {"scheme": "eow"})


def test_endpoint_backend(tmp_path):
    config = load_config(write_config(tmp_path, lm={"endpoint": "tcp://127.0.0.1:9100"}))
    assert config.endpoint == "tcp://127.0.0.1:9100"
    assert config.tabular_path is None


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"colour": "blue"}, "unknown keys"),
        ({"lm": {"tabular": "a", "endpoint": "b"}}, '"lm" must be'),
        ({"lm": None}, '"lm" must be'),
        ({"vocab": "missing.tsv"}, "vocab file not found"),
        ({"lm": {"tabular": "missing.tsv"}}, "lm file not found"),
        ({"scheme": "wordpiece"}, "scheme must be"),
        ({"scheme": "eow", "mark_first_word": False}, "mark_first_word must be true"),
        ({"seed": "3"}, "seed must be an integer"),
        ({"seed": True}, "seed must be an integer"),
        ({"punct_ids": ["2"]}, "punct_ids"),
        ({"tolerance": 0}, "tolerance must lie"),
        ({"tolerance": "tight"}, "invalid value"),
        ({"exact": "yes"}, '"exact" must be true or false'),
        ({"lm_order": -1}, "lm_order must be"),
        ({"lm_order": "2"}, "lm_order must be"),
        ({"lm_order": 1.5}, "lm_order must be"),
    ],
)
def test_invalid_values(tmp_path, changes, message):
    with pytest.raises(ConfigError, match=message):
        load_config(write_config(tmp_path, **changes))


def test_bow_unmarked_final_is_unsupported(tmp_path):
    with pytest.raises(UnsupportedRegime):
        load_config(write_config(tmp_path, mark_final_word=False))


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(str(bad))
    bad.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="object"):
        load_config(str(bad))


def test_save_effective_config(tmp_path):
    config = load_config(write_config(tmp_path, seed=3))
    path = save_effective_config(config)
    assert path == os.path.join(config.out_dir, EFFECTIVE_CONFIG_NAME)
    with open(path, encoding="utf-8") as f:
        saved = json.load(f)
    assert "source" not in saved
    assert saved["seed"] == 3
    assert saved["lm"] == {"tabular": os.path.join(TOY1_DIR, "lm.tsv")}
    assert list(saved) == sorted(saved)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
