import json
from pathlib import Path

import pytest

from evorat.cli import baseline_maps, main
from evorat.config import KEYS, ExperimentConfig, from_mapping, load_config
from evorat.exceptions import ConfigurationError

ROOT = Path(__file__).resolve().parents[1]
SMOKE = str(ROOT / "configs" / "smoke.yaml")


def _files(d: Path, pattern="*"):
    return {p.name: p.read_bytes() for p in sorted(d.glob(pattern)) if p.is_file()}


# ---- config --------------------------------------------------------------------------

def test_defaults_match_schema():
    cfg = load_config(None)
    assert cfg.values == {k: v[0] for k, v in KEYS.items()}
    ga = cfg.ga_config(3)
    assert (ga.population_size, ga.generations, ga.mut_sigma, ga.tau, ga.master_seed) == (50, 100, 0.05, 0.1, 3)


def test_unknown_key_rejected(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("I: 10\nbogus: 1\n")
    with pytest.raises(ConfigurationError, match="bogus"):
        load_config(f)


@pytest.mark.parametrize("mapping", [
    {"I": "ten"}, {"I": 3}, {"sigma": 0.0}, {"cell_type": "LSTM"}, {"seeds": []},
    {"threads": 0}, {"skew_mode": "weird"}, {"highlights": ["aba", "abd"]}, {"tau": None},
])
def test_invalid_values_rejected(mapping):
    with pytest.raises(ConfigurationError):
        from_mapping(mapping)


def test_bad_yaml(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("I: [1, 2\n")
    with pytest.raises(ConfigurationError):
        load_config(f)
    f.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigurationError):
        load_config(f)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")


def test_hash_stable_and_ignores_threads():
    a = from_mapping({"I": 10})
    assert a.hash() == from_mapping({"I": 10}).hash()
    assert a.hash() == a.with_overrides(threads=4).hash()
    assert a.hash() != a.with_overrides(I=12).hash()


def test_int_accepted_for_float_key():
    assert from_mapping({"lr": 1}).lr == 1.0


def test_shipped_configs_load():
    for f in sorted((ROOT / "configs").glob("*.yaml")):
        assert isinstance(load_config(f), ExperimentConfig)


# ---- CLI -----------------------------------------------------------------------------

def test_baseline_maps_shapes():
    m = baseline_maps(["aba", "baa", "abc"])
    assert m["correct"] == {0: "aba", 1: "baa", 2: "abc"}
    assert m["swapped"] == {0: "abc", 1: "baa", 2: "aba"}
    assert m["bigram"] == {0: "ba", 1: "aa", 2: "bc"}


def test_gen_data_byte_identical(tmp_path, capsys):
    outs = []
    for d in ("a", "b"):
        assert main(["gen-data", "--total", "200", "--seed", "4", "--out", str(tmp_path / d)]) == 0
        outs.append(json.loads(capsys.readouterr().out))
    assert outs[0]["sizes"] == {"train": 128, "validation": 32, "test": 40}
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b and set(a) == {"train.jsonl", "validation.jsonl", "test.jsonl", "vocab.txt"}


def test_landscape_command(tmp_path, capsys):
    assert main(["landscape", "--resolution", "11", "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["rows"] == 121
    lines = (tmp_path / "landscape.csv").read_text().splitlines()
    assert len(lines) == 122
    first = (tmp_path / "landscape.csv").read_bytes()
    main(["landscape", "--resolution", "11", "--out", str(tmp_path)])
    assert (tmp_path / "landscape.csv").read_bytes() == first


def test_baseline_command(tmp_path, capsys):
    assert main(["baseline", "--config", SMOKE, "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["baselines"]["correct"]["hl_f1"] == 100.0
    assert json.loads((tmp_path / "baselines.json").read_text()) == res


def test_error_reports_json_and_nonzero_exit(tmp_path, capsys):
    f = tmp_path / "bad.yaml"
    f.write_text("nonsense_key: 1\n")
    assert main(["evolve", "--config", str(f), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigurationError" and err["command"] == "evolve"
    assert "nonsense_key" in err["message"]


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0


def test_evolve_smoke_outputs(tmp_path, capsys):
    assert main(["evolve", "--config", SMOKE, "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["seeds"] == [0, 1]
    names = set(_files(tmp_path))
    for s in (0, 1):
        assert {f"run_plain_seed{s}.json", f"history_plain_seed{s}.csv", f"genome_plain_seed{s}.npy"} <= names
    rec = json.loads((tmp_path / "run_plain_seed0.json").read_text())
    assert rec["config_hash"] == res["config_hash"]
    hist = (tmp_path / "history_plain_seed0.csv").read_text().splitlines()
    assert hist[0] == f"# config_hash={res['config_hash']}"
    assert len(hist) == 2 + 3  # comment, header, generations 0..2


def test_evolve_is_deterministic_across_threads(tmp_path):
    assert main(["evolve", "--config", SMOKE, "--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
    assert main(["evolve", "--config", SMOKE, "--out", str(tmp_path / "t2"), "--threads", "2"]) == 0
    a = _files(tmp_path / "t1")
    b = _files(tmp_path / "t2")
    a.pop("timings_plain.json")
    b.pop("timings_plain.json")
    assert a == b


def test_skew_smoke(tmp_path, capsys):
    assert main(["skew", "--config", SMOKE, "--mode", "all_noisy", "--seed", "0", "-G", "1",
                 "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["mode"] == "all_noisy"
    assert (tmp_path / "run_all_noisy_seed0.json").exists()
