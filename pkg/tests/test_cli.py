import argparse
import json
import math

import pytest

from bbmfem import cli


def test_value_parsers():
    assert cli.parse_speed("sqrt1.6") == pytest.approx(math.sqrt(1.6))
    assert cli.parse_speed("sqrt(1.6)") == pytest.approx(math.sqrt(1.6))
    assert cli.parse_speed("1.2") == 1.2
    assert cli.parse_speeds("1.6,1.2") == [1.6, 1.2]
    assert cli.parse_domain("-40:40") == (-40.0, 40.0)
    assert cli.parse_dt("ratio:0.1") == ("ratio", 0.1)
    assert cli.parse_dt("0.05") == ("value", 0.05)
    assert cli.resolve_dt(("ratio", 0.5), 0.2) == pytest.approx(0.1)
    for bad in ("x", "1:"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_domain(bad)
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_domain("3:1")
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_speed("fast")


def test_negative_values_are_joined():
    assert cli._join_negative_values(["x", "--domain", "-40:40", "--r", "3"]) == \
        ["x", "--domain=-40:40", "--r", "3"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# solitary settings\nT = 7\nr=2\nno-relax = yes\n")
    args = cli.parse_args(["solitary", "--config", str(cfg), "--r", "3"])
    assert args.T == 7.0
    assert args.r == 3
    assert args.no_relax is True
    cfg.write_text("nonsense = 1\n")
    with pytest.raises(cli.ConfigurationError):
        cli.parse_args(["solitary", "--config", str(cfg)])


def test_usage_errors_exit_1(capsys):
    assert cli.main([]) == 1
    assert cli.main(["solitary", "--bogus"]) == 1
    assert cli.main(["converge", "--r", "7"]) == 1
    assert cli.main(["solitary", "--config", "/nonexistent/file"]) == 1
    assert cli.main(["check", "--criteria", "99"]) == 1
    assert cli.main(["converge", "--dx", "0.3", "--T", "0.1"]) == 1
    capsys.readouterr()


def test_numerical_failure_exits_2(tmp_path, capsys):
    code = cli.main(["solitary", "--dx", "0.2", "--dt", "4", "--T", "40", "--no-track",
                     "--out", str(tmp_path)])
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_petviashvili_then_seeded_solitary(tmp_path, capsys):
    wave_dir = tmp_path / "wave"
    assert cli.main(["petviashvili", "--cs", "sqrt1.6", "--domain", "-20:20", "--dx", "0.2",
                     "--out", str(wave_dir)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] residual" in out
    run_dir = tmp_path / "run"
    assert cli.main(["solitary", "--domain", "-20:20", "--dx", "0.2", "--dt", "ratio:1",
                     "--T", "1", "--seed-wave", str(wave_dir / "wave.csv"),
                     "--out", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] conserved drifts" in out
    manifest = json.loads((run_dir / "run.json").read_text())
    assert manifest["config"]["command"] == "solitary"
    assert cli.main(["check", "--read", str(run_dir)]) == 0


def test_other_commands(tmp_path, capsys):
    assert cli.main(["converge", "--bc", "periodic", "--r", "1", "--dx", "0.1,0.05", "--T", "0.1",
                     "--out", str(tmp_path / "c")]) == 0
    assert cli.main(["reflect", "--dx", "0.2", "--dt", "0.2", "--T", "1", "--out", str(tmp_path / "r")]) == 0
    assert cli.main(["collide", "--dx", "0.2", "--dt", "0.2", "--T", "1", "--out", str(tmp_path / "k")]) == 0
    assert (tmp_path / "k" / "snapshots.csv").exists()
    assert cli.main(["check", "--read", str(tmp_path / "c")]) == 0
    (tmp_path / "c" / "broken.csv").write_text("a,b\n1\n")
    assert cli.main(["check", "--read", str(tmp_path / "c")]) == 2
    assert cli.main(["check", "--read", str(tmp_path / "nothing")]) == 1
    capsys.readouterr()
