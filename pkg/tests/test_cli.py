"""Batch front end: exit codes, spec dispatch, CSV stamps, determinism."""

import json
import os

import pytest

from rrl.cli import RunConfig, main, manifest_hash

LAW_TEXT = "family = power\nalpha = 1.5\nright_mass = 0.95\nleft = atoms:(-1:0.05)\n"
DENSITY_TEXT = ("family = cont_power\nalpha = 1.4\nx0 = 1.0\n"
                "left_rate = 1.0\nleft_mass = 0.1\n")


@pytest.fixture()
def law_file(tmp_path):
    path = tmp_path / "t.law"
    path.write_text(LAW_TEXT)
    return str(path)


@pytest.fixture()
def density_file(tmp_path):
    path = tmp_path / "t.density"
    path.write_text(DENSITY_TEXT)
    return str(path)


def _read_meta(path):
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#meta "):
                break
            key, _, val = line[len("#meta "):].strip().partition("=")
            meta[key] = val
    return meta


# -- configuration guardrails ------------------------------------------------


def test_config_validates_tolerance_band():
    with pytest.raises(ValueError):
        RunConfig(subcommand="renewal", tol=1e-2)
    with pytest.raises(ValueError):
        RunConfig(subcommand="renewal", tol=1e-13)
    RunConfig(subcommand="renewal", tol=1e-12)     # boundary is allowed


def test_config_validates_positivity():
    for field, value in (("n_max", 0), ("grid_m", -4), ("k_max", 0),
                         ("replicas", 0), ("t_max", 0.0)):
        with pytest.raises(ValueError):
            RunConfig(subcommand="mc", **{field: value})
    with pytest.raises(ValueError):
        RunConfig(subcommand="mc", seed=-1)
    with pytest.raises(ValueError):
        RunConfig(subcommand="mc", grid_m=3000)    # not a power of two


def test_manifest_hash_ignores_out_dir():
    a = RunConfig(subcommand="mc", out_dir="x")
    b = RunConfig(subcommand="mc", out_dir="y")
    assert manifest_hash(a, b"s") == manifest_hash(b, b"s")
    assert manifest_hash(a, b"s") != manifest_hash(a, b"other spec")


# -- exit codes --------------------------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_is_usage_error(law_file, tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["renewal", "--spec", law_file, "--bogus", "1",
                 "--out", str(out)])
    assert code == 2
    assert not out.exists()                       # no partial outputs


def test_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0


def test_spec_parse_error_names_line(tmp_path, capsys):
    bad = tmp_path / "bad.law"
    bad.write_text("family = power\nalpha = oops\nright_mass = 1.0\n")
    out = tmp_path / "o"
    code = main(["law-info", "--spec", str(bad), "--out", str(out)])
    assert code == 2
    assert "line 2" in capsys.readouterr().err
    assert not out.exists()


def test_bad_tolerance_exit_2(law_file, capsys):
    assert main(["renewal", "--spec", law_file, "--tol", "0.5"]) == 2


def test_density_subcommand_rejects_lattice_spec(law_file, tmp_path, capsys):
    code = main(["density", "--spec", law_file,
                 "--out", str(tmp_path / "o")])
    assert code == 1


def test_verify_rejects_unknown_criteria(capsys):
    assert main(["verify", "--criteria", "99"]) == 2
    assert main(["verify", "--criteria", "two"]) == 2


# -- subcommand outputs ------------------------------------------------------


def test_law_info_writes_table(law_file, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["law-info", "--spec", law_file, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "mu" in stdout and "right_tail" in stdout
    meta = _read_meta(out / "law_info.csv")
    assert "manifest" in meta
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "law-info"
    assert meta["manifest"] == manifest["manifest_hash"]
    assert manifest["outputs"] == ["law_info.csv"]


def test_renewal_two_method_stamp(law_file, tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["renewal", "--spec", law_file, "--n-max", "300",
                 "--grid-m", str(1 << 14), "--tol", "1e-6",
                 "--out", str(out)])
    assert code == 0
    meta = _read_meta(out / "u.csv")
    gap = float(meta["two_method_max_diff"])
    assert gap <= float(meta["budget_doubling"]) + float(meta["budget_inversion"])
    with open(out / "u.csv") as fh:
        body = fh.read()
    assert ",doubling" in body and ",inversion" in body
    assert (out / "differences.csv").exists()


def test_expansion_table_columns(law_file, tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["expansion", "--spec", law_file, "--n-max", "2000",
                 "--grid-m", str(1 << 16), "--tol", "1e-6", "--k-max", "5",
                 "--out", str(out)])
    assert code == 0
    with open(out / "expansion.csv") as fh:
        lines = [l for l in fh.read().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    # k clamped to r*(1.5) = 2 regardless of the requested 5
    assert header == ["n", "phibar_1", "phibar_2", "partial_sum", "u", "d",
                      "first_order", "ratio_2", "e_star"]
    meta = _read_meta(out / "expansion.csv")
    assert meta["k_max_effective"] == "2"


def test_mc_csv_and_determinism(law_file, tmp_path, capsys, monkeypatch):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["mc", "--spec", law_file, "--n-max", "200",
            "--replicas", "20000"]
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("RRL_THREADS", "3")
    assert main(args + ["--out", str(out2)]) == 0
    a = (out1 / "mc.csv").read_bytes()
    b = (out2 / "mc.csv").read_bytes()
    assert a == b
    header = a.decode().splitlines()
    cols = next(l for l in header if not l.startswith("#"))
    assert cols == "n,u_mc,se,bias_bound"


def test_invalid_thread_env_exit_2(law_file, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("RRL_THREADS", "many")
    code = main(["mc", "--spec", law_file, "--n-max", "50",
                 "--replicas", "1000", "--out", str(tmp_path / "o")])
    assert code == 2


def test_verify_single_criterion(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["verify", "--criteria", "2", "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "criterion  2 PASS" in stdout
    meta = _read_meta(out / "verify.csv")
    assert meta["all_pass"] == "True"


def test_density_pair_outputs(density_file, tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["density", "--spec", density_file, "--t-max", "1000",
                 "--grid-m", str(1 << 17), "--out", str(out)])
    assert code == 0
    for name in ("density_pair.csv", "density_h.csv", "density_h2.csv"):
        assert (out / name).exists()
    meta = _read_meta(out / "density_pair.csv")
    assert float(meta["phibar1_pair_gap"]) < 0.02
