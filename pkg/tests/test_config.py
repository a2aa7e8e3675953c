import math
import subprocess

import pytest

from floquet_anneal.config import (
    EXPERIMENTS, ExperimentConfig, config_hash, load_config, parse_config,
    preset, save_config, validate_config,
)


def _errors(cfg):
    return [f for f in validate_config(cfg) if f.severity == "error"]


def _warnings(cfg):
    return [f for f in validate_config(cfg) if f.severity == "warning"]


def test_presets_round_trip_and_validate():
    for name in EXPERIMENTS:
        cfg = preset(name)
        again = parse_config(cfg.to_text())
        assert again == cfg
        assert config_hash(again) == config_hash(cfg)
        assert validate_config(cfg) == []


def test_config_hash_matches_git_blob():
    cfg = preset("floquet_qa_uniform")
    blob = subprocess.run(["git", "hash-object", "--stdin"],
                          input=cfg.to_text().encode(), capture_output=True,
                          check=True).stdout.decode().strip()
    assert config_hash(cfg) == blob
    assert config_hash(cfg.replace(nx=46)) != blob


def test_file_round_trip(tmp_path):
    cfg = preset("chern_dynamics").replace(out_dir="here")
    path = tmp_path / "run.cfg"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_parse_comments_and_errors():
    cfg = parse_config("experiment = haldane_qa  # inline comment\n"
                       "\n# full-line comment\nl_values = 6, 8\n")
    assert cfg.experiment == "haldane_qa"
    assert cfg.l_values == (6, 8)
    assert all(isinstance(v, int) for v in cfg.l_values)
    with pytest.raises(ValueError, match="unknown key"):
        parse_config("no_such_field = 3\n")
    with pytest.raises(ValueError, match="duplicate"):
        parse_config("nx = 8\nnx = 10\n")
    with pytest.raises(ValueError, match="key = value"):
        parse_config("just words\n")
    with pytest.raises(ValueError, match="boolean"):
        parse_config("full_scale = maybe\n")


def test_default_out_dir():
    cfg = ExperimentConfig(experiment="subresonant")
    assert cfg.out_dir == "runs/subresonant"
    assert ExperimentConfig(out_dir="x").out_dir == "x"


def test_validation_lattice_findings():
    base = preset("floquet_qa_uniform")
    assert any(f.key == "nx" for f in _errors(base.replace(nx=47)))
    assert any(f.key == "nx" for f in _errors(base.replace(nx=2)))
    assert any(f.key == "ny" for f in _errors(base.replace(ny=0)))
    assert any(f.key == "t1" for f in _errors(base.replace(t1=0.0)))
    assert any(f.key == "l_values"
               for f in _errors(preset("chern_dynamics").replace(
                   l_values=(12, 15, 24))))


def test_validation_drive_findings():
    base = preset("floquet_qa_uniform")
    assert any(f.key == "tau_qa" for f in _errors(base.replace(tau_qa=99.7)))
    assert not _errors(base.replace(tau_qa=100.0 + 1e-12))
    assert any(f.key == "x_sigma" for f in _errors(
        base.replace(envelope="gaussian", x_sigma=0.0)))
    assert any(f.key == "envelope" for f in _errors(base.replace(envelope="flat")))
    assert any(f.key == "delta_mode" for f in _errors(base.replace(delta_mode="x")))
    assert any(f.key == "dt_divisor" for f in _errors(base.replace(dt_divisor=130)))
    # sub-bandwidth frequency outside the subresonant experiment only warns
    low = base.replace(hw=4.0, tau_qa=10.0, tau_f=10.0)
    assert not _errors(low)
    assert any(f.key == "hw" for f in _warnings(low))
    assert not any(f.key == "hw" for f in _warnings(preset("subresonant")))


def test_validation_static_ramp_findings():
    base = preset("haldane_qa")
    assert any(f.key == "t2" for f in _errors(base.replace(t2=0.0)))
    assert any(f.key == "tau_qa_values" for f in _errors(
        base.replace(tau_qa_values=(4.0, -1.0))))
    assert any(f.key == "dt" for f in _errors(base.replace(dt=0.0)))
    # the integer-period constraint is a driven-clock rule, not a static one
    assert not _errors(base.replace(tau_qa_values=(2.5, 5.1, 9.9)))


def test_validation_unknown_experiment_short_circuits():
    findings = validate_config(ExperimentConfig(experiment="nope"))
    assert len(findings) == 1
    assert findings[0].severity == "error"


def test_period_property():
    assert abs(ExperimentConfig(hw=7.0).period - 2.0 * math.pi / 7.0) < 1e-15
