import json

import pytest

from cmcurate.config import ToolConfig, config_hash, load_config, parse_config
from cmcurate.errors import ConfigError

GOOD = """
seed = 7
workers = 2

[filters]
qe_threshold = 0.85
disabled = ["char_repetition"]
qe_backend = "qe"

[lid]
backends = ["a", "b", "c"]

[[backends]]
name = "qe"
endpoint = "https://qe.example.org"
api_key_env = "QE_KEY"

[[backends]]
name = "a"
endpoint = "python3 a.py"

[[backends]]
name = "b"
endpoint = "python3 b.py"

[[backends]]
name = "c"
endpoint = "python3 c.py"
rate_limit = 2
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_defaults():
    cfg = load_config(None)
    assert cfg == ToolConfig()
    fc = cfg.filter_config()
    assert fc.length_interval == (0.5, 1.5) and fc.qe_threshold == 0.9 and fc.classifier_threshold == 0.5


def test_good_toml(tmp_path):
    cfg = load_config(write(tmp_path, GOOD))
    assert cfg.seed == 7 and cfg.filters.qe_threshold == 0.85
    assert cfg.backend("c").rate_limit == 2.0
    assert cfg.filter_config().disabled == {"char_repetition"}
    assert cfg.filter_config().max_in_flight == 2


def test_json_equivalent(tmp_path):
    p = write(tmp_path, json.dumps({"seed": 7, "filters": {"qe_threshold": 0.85}}), "cfg.json")
    assert load_config(p).filters.qe_threshold == 0.85


@pytest.mark.parametrize(
    "data, key",
    [
        ({"sed": 1}, "sed"),
        ({"filters": {"qe_treshold": 0.9}}, "filters.qe_treshold"),
        ({"backends": [{"name": "x", "endpoint": "y", "api_key": "sekrit"}]}, "backends[0].api_key"),
        ({"filters": {"qe_threshold": "high"}}, "filters.qe_threshold"),
        ({"filters": {"qe_threshold": 1.2}}, "qe_threshold"),
        ({"filters": {"length_interval": [0.5]}}, "length_interval"),
        ({"filters": {"disabled": ["vibes"]}}, "vibes"),
        ({"filters": {"qe_backend": "ghost"}}, "filters.qe_backend"),
        ({"seed": True}, "seed"),
        ({"workers": 0}, "workers"),
        ({"lid": {"backends": ["a", "b"]}, "backends": [{"name": "a", "endpoint": "x"}, {"name": "b", "endpoint": "y"}]}, "odd"),
        ({"backends": [{"name": "a"}]}, "backends[0].endpoint"),
        ({"backends": [{"name": "a", "endpoint": "x"}, {"name": "a", "endpoint": "y"}]}, "duplicate"),
        ({"eval": {"margin_mode": "sideways"}}, "margin_mode"),
        ({"eval": {"n_resamples": 10}}, "n_resamples"),
        ({"lexicons": {"lang_a": "vi.txt"}}, "lang_b"),
        ({"pii": {"policy": "shred"}}, "pii.policy"),
        ({"split": {"fractions": [0.5, 0.5]}}, "split.fractions"),
        ({"filters": []}, "filters"),
    ],
)
def test_bad_configs_name_the_key(data, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        parse_config(data)


def test_unparseable_and_missing_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "seed = = 1"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_hash_tracks_effective_values():
    base = parse_config({})
    assert config_hash(base) == config_hash(ToolConfig())
    assert config_hash(parse_config({"seed": 0})) == config_hash(base)  # explicit default
    assert config_hash(parse_config({"filters": {"qe_threshold": 0.9}})) == config_hash(base)
    changed = [
        {"seed": 1},
        {"filters": {"qe_threshold": 0.91}},
        {"filters": {"disabled": ["qe"]}},
        {"eval": {"margin": 0.03}},
        {"backends": [{"name": "x", "endpoint": "y"}]},
    ]
    hashes = {config_hash(parse_config(c)) for c in changed}
    assert len(hashes) == len(changed) and config_hash(base) not in hashes


def test_secrets_never_in_config(monkeypatch):
    monkeypatch.setenv("QE_KEY", "sekrit")
    cfg = parse_config({"backends": [{"name": "x", "endpoint": "y", "api_key_env": "QE_KEY"}]})
    assert "sekrit" not in json.dumps(cfg.to_dict())
