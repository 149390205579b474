import json
import shutil
from pathlib import Path

import pytest

from dnr.cli import parse_seeds
from dnr.network import DATA_DIR
from dnr.report import read_profile

from .conftest import run_cli

GOLDEN = Path(__file__).parent / "golden"
VOLATILE = {"wall_time_s", "runtime_s"}


def strip_volatile(obj):
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def assert_matches_golden(got, expected):
    """Exact structure and integers; floats to 1e-12 relative."""
    if isinstance(expected, dict):
        assert got.keys() == expected.keys()
        for k in expected:
            assert_matches_golden(got[k], expected[k])
    elif isinstance(expected, list):
        assert len(got) == len(expected)
        for a, b in zip(got, expected):
            assert_matches_golden(a, b)
    elif isinstance(expected, float):
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)
    else:
        assert got == expected


@pytest.mark.parametrize(
    "command, extra",
    [("oracle", []), ("baseline", []), ("pf", ["--open", "1", "--compare-base"])],
)
def test_golden_4ring(tmp_path, command, extra):
    out, profile = tmp_path / "r.json", tmp_path / "p.csv"
    assert run_cli([command, "--case", "4ring", "--out", out, "--profile", profile, *extra]) == 0
    expected = json.loads((GOLDEN / f"4ring_{command}.json").read_text())
    assert_matches_golden(strip_volatile(json.loads(out.read_text())), expected)
    assert profile.read_text() == (GOLDEN / f"4ring_{command}_profile.csv").read_text()


def test_baseline_33(tmp_path, capsys):
    out = tmp_path / "b.json"
    assert run_cli(["baseline", "--case", "data/33bus", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["loss_kw"] == pytest.approx(202.3, rel=0.02)
    assert report["open"] == [33, 34, 35, 36, 37]
    assert "active loss" in capsys.readouterr().out


def test_missing_loads_file(tmp_path, capsys):
    d = tmp_path / "case"
    shutil.copytree(DATA_DIR / "33bus", d)
    (d / "loads.csv").unlink()
    assert run_cli(["baseline", "--case", d]) == 2
    assert "loads.csv: file not found" in capsys.readouterr().err


def test_unknown_case_directory(capsys):
    assert run_cli(["baseline", "--case", "/no/such/case"]) == 2
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--case", "4ring", "--seed", "1", "--seeds", "1..3"],
        ["solve", "--case", "4ring", "--seeds", "1..3", "--history", "h.csv"],
        ["solve", "--case", "4ring", "--seeds", "5..1"],
        ["solve", "--case", "4ring", "--mutation-rate", "2"],
        ["solve", "--case", "4ring", "--population-size", "ten"],
        ["baseline", "--case", "4ring", "--seed", "3"],
        ["pf", "--case", "4ring", "--open", "a,b"],
        ["pf", "--case", "4ring", "--open", "2,2"],
        ["pf", "--case", "4ring"],
        ["frobnicate", "--case", "4ring"],
        [],
    ],
)
def test_usage_errors(argv):
    # argparse problems exit from inside the parser; the rest come back as a return code
    try:
        code = run_cli(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_missing_config_file_is_a_usage_error(tmp_path):
    assert run_cli(["solve", "--case", "4ring", "--config", tmp_path / "none.cfg"]) == 1


def test_parse_seeds():
    assert parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert parse_seeds("3, 5,8..9") == [3, 5, 8, 9]
    with pytest.raises(ValueError):
        parse_seeds("")


def test_pf_rejects_islands(capsys):
    assert run_cli(["pf", "--case", "data/33bus", "--open", "1,2,3,4,5"]) == 2
    err = capsys.readouterr().err
    assert "not radial" in err and "island" in err and "cycle" in err


def test_pf_rejects_wrong_count(capsys):
    assert run_cli(["pf", "--case", "data/33bus", "--open", "7,9,14,32"]) == 2
    assert "opens exactly 5 branches" in capsys.readouterr().err


def test_pf_rejects_unknown_branch(capsys):
    assert run_cli(["pf", "--case", "data/33bus", "--open", "7,9,14,32,99"]) == 2


def test_pf_profile_columns(tmp_path):
    profile = tmp_path / "v.csv"
    assert run_cli(["pf", "--case", "33bus", "--open", "7,9,14,32,37", "--profile", profile]) == 0
    assert profile.read_text().splitlines()[0] == "node,v_pu"
    assert run_cli(["pf", "--case", "33bus", "--open", "7,9,14,32,37", "--profile", profile, "--compare-base"]) == 0
    cols = read_profile(profile)
    assert list(cols) == ["node", "v_pu_before", "v_pu_after"]
    assert len(cols["node"]) == 33


def test_numeric_failure_exit_code(tmp_path, capsys):
    d = tmp_path / "heavy"
    shutil.copytree(DATA_DIR / "4ring", d)
    (d / "loads.csv").write_text("node,p_kw,q_kvar\n1,0,0\n2,500000000,0\n3,0,0\n4,0,0\n")
    assert run_cli(["baseline", "--case", d]) == 3
    assert "did not converge" in capsys.readouterr().err


def test_solve_zero_generations(tmp_path):
    out = tmp_path / "s.json"
    assert run_cli(["solve", "--case", "33bus", "--generations", "0", "--seed", "4", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["ga"]["generations_run"] == 0
    assert len(report["open"]) == 5
    # the reported loss reproduces through pf
    again = tmp_path / "pf.json"
    assert run_cli(["pf", "--case", "33bus", "--open", ",".join(map(str, report["open"])), "--out", again]) == 0
    assert json.loads(again.read_text())["loss_kw"] == pytest.approx(report["loss_kw"], rel=1e-9)


def test_solve_seed_42_with_history(tmp_path):
    out, hist = tmp_path / "s.json", tmp_path / "h.csv"
    assert run_cli(["solve", "--case", "data/33bus", "--seed", "42", "--out", out, "--history", hist]) == 0
    report = json.loads(out.read_text())
    assert report["open"] == [7, 9, 14, 32, 37]
    assert report["seed"] == 42
    lines = hist.read_text().splitlines()
    assert lines[0].startswith("generation,")
    assert len(lines) == report["ga"]["generations_run"] + 2


def test_solve_round_trip_through_pf(tmp_path):
    out = tmp_path / "s.json"
    assert run_cli(["solve", "--case", "69bus", "--seed", "3", "--out", out]) == 0
    report = json.loads(out.read_text())
    again = tmp_path / "pf.json"
    assert run_cli(["pf", "--case", "69bus", "--open", ",".join(map(str, report["open"])), "--out", again]) == 0
    assert json.loads(again.read_text())["loss_kw"] == pytest.approx(report["loss_kw"], rel=1e-9)


def test_oracle_round_trip_through_pf(oracle33, tmp_path):
    report, _ = oracle33
    again = tmp_path / "pf.json"
    assert run_cli(["pf", "--case", "33bus", "--open", ",".join(map(str, report["open"])), "--out", again]) == 0
    assert json.loads(again.read_text())["loss_kw"] == pytest.approx(report["loss_kw"], rel=1e-9)


def test_seed_sweep_table(tmp_path, capsys):
    out = tmp_path / "sweep.json"
    assert run_cli(["solve", "--case", "4ring", "--seeds", "1..3", "--generations", "5", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "seed" in text
    sweep = json.loads(out.read_text())
    assert sweep["mode"] == "ga-sweep"
    assert [r["seed"] for r in sweep["seeds"]] == [1, 2, 3]
    assert sweep["summary"]["runs"] == 3


def test_certify_on_ring(tmp_path):
    out = tmp_path / "c.json"
    assert run_cli(["solve", "--case", "4ring", "--seed", "2", "--certify", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["reached_optimum"] is True
    assert report["oracle"]["valid_count"] == 4


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "ga.cfg"
    cfg.write_text("population_size = 12\nmax_generations = 3\n")
    out = tmp_path / "s.json"
    assert run_cli(["solve", "--case", "33bus", "--config", cfg, "--generations", "2", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["ga"]["generations_run"] <= 2


def test_validate_command(tmp_path, capsys):
    assert run_cli(["validate", "--case", "33bus"]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")
    d = tmp_path / "bad"
    shutil.copytree(DATA_DIR / "33bus", d)
    p = d / "branches.csv"
    p.write_text(p.read_text().replace("\n5,5,6,", "\n5,5,5,", 1))
    assert run_cli(["validate", "--case", d]) == 2
    assert "self-loop" in capsys.readouterr().err


def test_oracle_valid_count_printed(capsys):
    assert run_cli(["oracle", "--case", "4ring"]) == 0
    assert "spanning trees   4 of 4" in capsys.readouterr().out
