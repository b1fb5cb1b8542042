import csv
import math

import numpy as np
import pytest
import yaml

from dptm import artifacts
from dptm.cli import OUTPUT_ROOT_ENV, build_report, main, resolve_output_dir
from dptm.config import RunConfig, config_from_dict, config_hash, dump_config, load_config
from dptm.errors import ConfigError

TINY = {
    "benchmark": {"samples_per_class_per_domain": 20},
    "R": 2,
    "source_train": {"epochs": 5},
    "adapt_train": {"epochs": 2},
}


def write_cfg(tmp_path, raw, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return p


@pytest.fixture
def tiny_run(tmp_path):
    cfg = write_cfg(tmp_path, TINY)
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out), "--dump-traces"]) == 0
    return cfg, out


def test_defaults():
    cfg = RunConfig()
    assert (cfg.guidance.gamma1, cfg.guidance.gamma2, cfg.guidance.S) == (5.5, 0.0, 20)
    assert (cfg.E, cfg.R) == (0.01, 10)
    assert cfg.rho_init_value == cfg.rho_mix_value == 2.0


def test_echo_round_trip():
    cfg = config_from_dict({**TINY, "rho_mix": float("inf"), "seed": 4})
    again = config_from_dict(yaml.safe_load(dump_config(cfg)))
    assert again == cfg and config_hash(again) == config_hash(cfg)
    assert cfg.benchmark.seed == 4


def test_hash_ignores_output_location():
    a = config_from_dict({"output_dir": "x"})
    b = config_from_dict({"output_dir": "y", "dump_traces": True})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(config_from_dict({"seed": 1}))
    # an explicit cutoff equal to the default is the same run
    assert config_hash(a) == config_hash(config_from_dict({"rho_init": 2.0}))


def test_yaml_exponent_strings():
    cfg = config_from_dict({"source_train": {"learning_rate": "1e-3"}})
    assert cfg.source_train.learning_rate == 1e-3


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"benchmark": {"n": "big"}}, "benchmark.n"),
        ({"guidance": {"S": 0}}, "guidance.S"),
        ({"bogus": 1}, "bogus"),
        ({"adapt_train": {"seed": 1}}, "adapt_train.seed"),
        ({"source_train": {"momentum": 1.5}}, "source_train.momentum"),
        ({"E": -1}, "E"),
        ({"R": 2.5}, "R"),
        ({"schedule": {"beta_end": 2.0}}, "schedule.beta_end"),
        ({"benchmark": {"C": None}}, "benchmark.C"),
    ],
)
def test_invalid_fields_are_named(raw, field):
    with pytest.raises(ConfigError) as e:
        config_from_dict(raw)
    assert e.value.field == field


def test_run_config_error_exit(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"guidance": {"gamma1": "strong"}})
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "guidance.gamma1" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    bad_rho = write_cfg(tmp_path, {**TINY, "rho_mix": 40.0}, "rho.yaml")
    assert main(["run", str(bad_rho), "--out", str(tmp_path / "p")]) == 2
    assert "rho_mix" in capsys.readouterr().err


def test_run_artifacts(tiny_run):
    cfg_path, out = tiny_run
    cfg = load_config(cfg_path)
    chash = config_hash(cfg)
    text = (out / "metrics.csv").read_text().splitlines()
    assert text[0] == f"# config_hash: {chash}"
    rows = list(csv.DictReader(text[1:]))
    assert list(rows[0]) == ["r", "trust_size", "trust_accuracy", "non_trust_size", "manipulated_size", "target_accuracy"]
    assert [int(r["r"]) for r in rows] == [0, 1, 2]
    assert int(rows[0]["manipulated_size"]) == 0
    for r in rows[1:]:
        assert int(r["manipulated_size"]) == int(r["non_trust_size"]) // 4 * 4
    ckpts = artifacts.list_checkpoints(out)
    assert len(ckpts) == 3
    model, meta = artifacts.load_checkpoint(ckpts[0])
    assert meta["config_hash"] == chash and model.W.shape == (4, 256)
    assert ckpts[0].stat().st_size == (4 * 256 + 4) * 8
    X, y, meta = artifacts.load_dataset(out / "data" / "target.f32")
    assert X.shape == (80, 16, 16) and meta["domain"] == 1 and len(y) == 80
    sel = artifacts.read_yaml(out / "selection.yaml")
    assert len(sel["nuclear_norms"]) == 3 and sel["selected_r"] == int(np.argmax(sel["nuclear_norms"]))
    assert yaml.safe_load((out / "config.yaml").read_text())["R"] == 2


def test_checkpoint_accuracy_matches_metrics(tiny_run):
    _, out = tiny_run
    X, y, _ = artifacts.load_dataset(out / "data" / "target.f32")
    _, rows = artifacts.read_metrics(out / "metrics.csv")
    from dptm.classifier import accuracy

    # datasets are stored as float32, so allow a flipped borderline sample
    for p, row in zip(artifacts.list_checkpoints(out), rows):
        model, _ = artifacts.load_checkpoint(p)
        assert abs(accuracy(model, X, y) - row["target_accuracy"]) <= 1 / len(y) + 1e-12


def test_traces(tiny_run):
    _, out = tiny_run
    files = artifacts.list_traces(out)
    assert [p.name for p in files] == ["r01.f32", "r02.f32"]
    arrays, meta = artifacts.load_traces(files[0])
    assert meta["count"] <= 16 and arrays["steps"].shape[1:] == (20, 4, 16, 16)
    assert meta["timesteps"][0] == 1000 and meta["timesteps"][-1] == 1


def test_report(tiny_run, capsys):
    _, out = tiny_run
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "complete" in text and "selection: r=" in text and "r01.f32" in text
    assert len([l for l in text.splitlines() if l[:4].strip().isdigit()]) == 3


def test_report_refuses_mismatch(tiny_run, capsys):
    _, out = tiny_run
    p = out / "metrics.csv"
    lines = p.read_text().splitlines()
    lines[0] = "# config_hash: " + "0" * 64
    p.write_text("\n".join(lines) + "\n")
    assert main(["report", str(out)]) == 4
    assert "metrics.csv" in capsys.readouterr().err


def test_report_edited_config_refused(tiny_run):
    _, out = tiny_run
    echo = out / "config.yaml"
    echo.write_text(echo.read_text().replace("R: 2", "R: 3"))
    with pytest.raises(artifacts.ArtifactError):
        build_report(out)


def test_report_empty_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 4
    assert "config.yaml" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "nope")]) == 4


def test_partial_run_report(tiny_run, capsys):
    _, out = tiny_run
    (out / "selection.yaml").unlink()
    assert main(["report", str(out)]) == 0
    assert "partial" in capsys.readouterr().out


def test_r_zero_run(tmp_path):
    cfg = write_cfg(tmp_path, {**TINY, "R": 0})
    out = tmp_path / "r0"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    _, rows = artifacts.read_metrics(out / "metrics.csv")
    assert len(rows) == 1 and rows[0]["r"] == 0


def test_refuses_foreign_run_dir(tiny_run, tmp_path):
    _, out = tiny_run
    other = write_cfg(tmp_path, {**TINY, "E": 0.5}, "other.yaml")
    assert main(["run", str(other), "--out", str(out)]) == 4


def test_seed_flag_and_output_root(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, {**TINY, "R": 0, "output_dir": "rel"})
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert resolve_output_dir(load_config(cfg)) == tmp_path / "root" / "rel"
    assert main(["run", str(cfg), "--seed", "7"]) == 0
    assert load_config(tmp_path / "root" / "rel" / "config.yaml").seed == 7
    assert main(["run", str(cfg), "--seed", "-1"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_keeps_partial_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {**TINY, "adapt_train": {"learning_rate": 1000.0, "weight_decay": 10.0, "epochs": 50}})
    out = tmp_path / "boom"
    assert main(["run", str(cfg), "--out", str(out)]) == 3
    assert "numerical failure" in capsys.readouterr().err
    _, rows = artifacts.read_metrics(out / "metrics.csv")
    assert len(rows) == 1 and artifacts.list_checkpoints(out)
