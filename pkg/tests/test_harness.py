import json
import os

import pytest

from rvint.harness.cli import main
from rvint.harness.config import DEFAULTS, EXPERIMENTS, ConfigError, parse_config
from rvint.harness.experiments import run_experiment


def _cfg(name, extra=""):
    return f"[experiment]\nname = {name}\n{extra}"


def test_minimal_config_gets_defaults():
    cfg = parse_config(_cfg("rv-identities"))
    assert cfg.grid.N == 4096 and cfg.experiment.mc == 1000
    assert cfg.ladder_values() == (0.1, 0.05, 0.025, 0.0125)
    assert set(DEFAULTS) == set(EXPERIMENTS)


def test_ladder_below_floor_names_field():
    with pytest.raises(ConfigError) as err:
        parse_config(_cfg("rv-identities", "[ladder]\neps0 = 0.01\nlength = 4\n"))
    assert any(path == "ladder" for path, _ in err.value.failures)


def test_unknown_g_lists_registry():
    with pytest.raises(ConfigError) as err:
        parse_config(_cfg("spde-adapted", "[g]\nname = cubic\n"))
    (path, msg), = err.value.failures
    assert path == "g.name"
    for name in ("zero", "constant", "linear", "sine"):
        assert name in msg


def test_unknown_field_and_bad_type():
    with pytest.raises(ConfigError) as err:
        parse_config(_cfg("isometry", "[grid]\nN = many\nQ = 3\n"))
    paths = {p for p, _ in err.value.failures}
    assert {"grid.N", "grid.Q"} <= paths


def test_truncation_ordering():
    with pytest.raises(ConfigError) as err:
        parse_config(_cfg("spde-adapted", "[truncation]\nJ = 40\n"))
    assert err.value.failures[0][0] == "truncation.J"


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config(_cfg("nope"))


def test_overrides_and_hash():
    a = parse_config(_cfg("lipschitz"), {"experiment.seed": 5})
    b = parse_config(_cfg("lipschitz", "seed = 5\n"), {"experiment.workers": 3, "experiment.out_dir": "x"})
    assert a.experiment.seed == 5 and a.config_hash() == b.config_hash()
    assert a.config_hash() != parse_config(_cfg("lipschitz")).config_hash()


def test_function_params_pass_through():
    cfg = parse_config(_cfg("spde-adapted", "[g]\nname = linear\nsigma = 0.25\n"))
    assert cfg.build("g").params == {"sigma": 0.25}


SMALL = {
    "kernel-bounds": "",
    "lipschitz": "mc = 4\n[grid]\nN = 64\nP = 16\n[truncation]\nJ = 4\nM = 4\n",
    "proposition1": "mc = 20\n[grid]\nN = 512\n[truncation]\nJ = 3\nM = 3\n[ladder]\neps0 = 0.08\nlength = 3\n",
}


@pytest.mark.parametrize("name", sorted(SMALL))
def test_rerun_is_byte_identical(name, tmp_path):
    cfg = parse_config(_cfg(name, SMALL[name]))
    a = run_experiment(cfg, str(tmp_path / "a"))
    b = run_experiment(cfg.model_copy(update={"experiment": cfg.experiment.model_copy(update={"workers": 3})}),
                       str(tmp_path / "b"))
    files = sorted(os.listdir(a.out_dir))
    assert "report.csv" in files and files == sorted(os.listdir(b.out_dir))
    for f in files:
        with open(os.path.join(a.out_dir, f), "rb") as fa, open(os.path.join(b.out_dir, f), "rb") as fb:
            assert fa.read() == fb.read(), f


def test_report_csv_layout(tmp_path):
    res = run_experiment(parse_config(_cfg("kernel-bounds")), str(tmp_path))
    lines = open(os.path.join(res.out_dir, "report.csv")).read().splitlines()
    assert lines[0].startswith("# experiment=kernel-bounds config_hash=")
    assert lines[1] == "row_id,quantity,estimate,standard_error,tolerance,pass"
    assert res.passed and all(line.endswith(",true") for line in lines[2:])


def test_module_error_becomes_failed_row():
    cfg = parse_config(_cfg("spde-anticipating", "mc = 2\n[F]\nname = constant\nvalue = 1e7\n"))
    res = run_experiment(cfg)
    assert not res.passed and "OutOfRangeError" in res.rows[0].quantity


def test_cli_list_and_validate(tmp_path, capsys):
    assert main(["list-experiments"]) == 0
    assert "spde-anticipating" in capsys.readouterr().out
    good = tmp_path / "good.ini"
    good.write_text(_cfg("isometry"))
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text(_cfg("spde-adapted", "[g]\nname = cubic\n"))
    assert main(["validate", str(bad)]) == 2
    assert "[g.name]" in capsys.readouterr().err


def test_cli_run_writes_summary(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "k.ini"
    cfg.write_text(_cfg("kernel-bounds"))
    monkeypatch.setenv("RVINT_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(cfg)]) == 0
    summary = json.loads((tmp_path / "env" / "kernel-bounds" / "summary.json").read_text())
    assert summary["passed"] and "wall_clock_seconds" in summary
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "kernel-bounds" / "report.csv").exists()


def test_cli_exit_code_counts_failures(tmp_path):
    cfg = tmp_path / "r.ini"
    cfg.write_text(_cfg("rv-identities", "[grid]\nN = 512\n[ladder]\neps0 = 0.16\nlength = 3\n"))
    code = main(["run", str(cfg), "--mc", "20", "--out-dir", str(tmp_path)])
    lines = open(tmp_path / "rv-identities" / "report.csv").read().splitlines()[2:]
    assert code == sum(line.endswith(",false") for line in lines)
