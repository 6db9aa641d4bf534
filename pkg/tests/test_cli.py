import json

import pytest

from linfest.cli import main
from linfest.experiments import CSV_HEADER

CONFIG = {"experiment": "scalar-sparse", "prior": {"kind": "sparse_gaussian", "s": 0.05, "mu_x": 1.0},
          "snr_db": 20, "N": [50], "p": [5], "estimators": ["wiener", "lp"], "trials": 2, "seed": 3}


def _config(tmp_path, **kw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(dict(CONFIG, **kw)))
    return path


def test_run_and_plot(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", "--config", str(_config(tmp_path)), "--out", str(out), "--threads", "2"]) == 0
    csv_file = out / "scalar-sparse.csv"
    assert csv_file.read_text().splitlines()[0] == CSV_HEADER
    assert "p_opt" in capsys.readouterr().out
    assert main(["plot", "--csv", str(csv_file), "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_text().startswith("<svg")


def test_seed_override_changes_csv(tmp_path):
    cfg = _config(tmp_path)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    a = (tmp_path / "a" / "scalar-sparse.csv").read_bytes()
    b = (tmp_path / "b" / "scalar-sparse.csv").read_bytes()
    assert a != b


@pytest.mark.parametrize("argv_tail", [
    ["--seed", "-1"],
    ["--threads", "0"],
])
def test_bad_run_flags_are_config_errors(tmp_path, argv_tail):
    assert main(["run", "--config", str(_config(tmp_path)), "--out", str(tmp_path)] + argv_tail) == 2


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(_config(tmp_path, typo=1))]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    weibull = {"kind": "sparse_weibull", "s": 0.05, "scale": 1.0, "shape": 0.5}
    assert main(["run", "--config", str(_config(tmp_path, prior=weibull))]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2


def test_runtime_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(CSV_HEADER + "\nx,1,1,0,0,W,,nan?,0,0\n")
    assert main(["plot", "--csv", str(bad), "--out", str(tmp_path / "p.svg")]) == 1
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "p.svg").exists()
    assert main(["plot", "--csv", str(tmp_path / "none.csv"), "--out", str(tmp_path / "p.svg")]) == 1


def test_evt_subcommand(capsys):
    assert main(["evt", "--n", "1000", "--trials", "5", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "berman n=1000" in out and "dominance fraction=" in out and "sigma2=" in out
    assert main(["evt", "--n", "1"]) == 2
    assert main(["evt", "--mu-z", "0"]) == 2
    assert main(["evt", "--s", "1.5"]) == 2


def test_evt_config_run(tmp_path, capsys):
    cfg = _config(tmp_path, experiment="evt-check", N=[100], trials=3, estimators=[], p=[])
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert "berman n=100" in capsys.readouterr().out
