import json

import numpy as np
import pytest

from qptcomplexity.cli import build_parser, main
from qptcomplexity.config import OUTPUT_ENV, SCHEMAS, ConfigError, load_config
from qptcomplexity.io import format_value, read_csv, write_csv


def _run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out), "--jobs", "1"])
    return code, out


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_every_subcommand_is_registered():
    sub = next(a for a in build_parser()._actions if a.dest == "subcommand")
    assert set(sub.choices) == set(SCHEMAS)


@pytest.mark.parametrize("v,s", [(0.1, "0.1"), (1 / 3, "0.333333333333"), (123456789012345.0, "1.23456789012e+14"),
                                 (-0.0, "0"), (True, "1"), (7, "7"), (np.nan, "nan"), (None, "")])
def test_format_value(v, s):
    assert format_value(v) == s


def test_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["x", "tag"], [(1.5, "a"), (2.0, "b")])
    assert p.read_text().splitlines()[0] == "# manifest: manifest.json"
    cols = read_csv(p)
    assert np.array_equal(cols["x"], [1.5, 2.0]) and cols["tag"] == ["a", "b"]
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", ["x"], [(1, 2)])


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[model]\nL = 8, 16\nJ_R = 0.5\n[run]\nseed = 4\n")
    cfg = load_config("ising-fs", f, {"dJ": "0.01"})
    assert cfg.L == [8, 16] and cfg.J_R == 0.5 and cfg.seed == 4 and cfg.dJ == 0.01
    bare = tmp_path / "bare.ini"
    bare.write_text("L = 8\n")
    assert load_config("ising-fs", bare).L == [8]


def test_config_digest_ignores_output_location(tmp_path):
    a = load_config("dicke", None, {"output_dir": "x", "jobs": 3})
    b = load_config("dicke", None, {"output_dir": "y"})
    assert a.digest() == b.digest()
    assert a.digest() != load_config("dicke", None, {"N": "10"}).digest()


@pytest.mark.parametrize("text,field", [
    ("L = 8, 9\n", "L"),
    ("dJ = -1\n", "dJ"),
    ("colour = red\n", "colour"),
    ("J_R = abc\n", "J_R"),
])
def test_config_errors_name_the_field(tmp_path, text, field):
    f = tmp_path / "bad.ini"
    f.write_text("# comment\n" + text)
    with pytest.raises(ConfigError) as exc:
        load_config("ising-fs", f)
    assert exc.value.field == field
    assert exc.value.line == 2


def test_invalid_config_exits_2(tmp_path, capsys):
    f = tmp_path / "bad.ini"
    f.write_text("[run]\nthreshold = 1.5\n")
    assert main(["adiabatic-tfi", "--config", str(f)]) == 2
    assert "threshold" in capsys.readouterr().err


def test_range_check(tmp_path):
    code, _ = _run(tmp_path, "adiabatic-tfi", "--T-min", "5", "--T-max", "1")
    assert code == 2


def test_missing_subcommand_exits_2():
    assert main([]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert load_config("dicke").output_dir == tmp_path / "env"
    assert load_config("dicke", None, {"output_dir": "here"}).output_dir.name == "here"


def test_ising_fs_outputs_and_reproducibility(tmp_path):
    argv = ["ising-fs", "--L", "8,16", "--dJ", "0.05", "--fit-L", "128,256,512,1024"]
    code, out = _run(tmp_path, *argv)
    assert code == 0
    cols = read_csv(out / "ising.csv")
    assert set(cols["L"]) == {8.0, 16.0}
    assert np.all(np.diff(cols["C_FS_per_site"][cols["L"] == 8]) >= 0)
    fit = json.loads((out / "fit.json").read_text())
    assert fit["manifest"] == "manifest.json" and 0.4 < fit["exponent"] < 0.6
    man = _manifest(out)
    assert man["subcommand"] == "ising-fs"
    assert {o["file"] for o in man["outputs"]} == {"ising.csv", "peaks.csv", "fit.json"}
    assert {"numpy", "scipy", "python"} <= set(man["versions"])
    first = (out / "ising.csv").read_bytes()
    main([*argv, "--out", str(out), "--jobs", "2"])
    assert (out / "ising.csv").read_bytes() == first
    assert _manifest(out)["config_hash"] == man["config_hash"]


def test_ising_nielsen(tmp_path):
    code, out = _run(tmp_path, "ising-nielsen", "--L", "8", "--dJ", "0.1", "--fit-L", "64,128,256")
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["law"] == "linear_log" and fit["params"]["b"] > 0


def test_dicke(tmp_path):
    code, out = _run(tmp_path, "dicke", "--N", "4,6", "--n-exc", "10", "--lam-min", "0.3", "--lam-max", "0.7",
                     "--dlam", "0.02")
    assert code == 0
    finite = read_csv(out / "dicke_finite.csv")
    thermo = read_csv(out / "dicke_thermo.csv")
    assert set(finite["N"]) == {4.0, 6.0}
    assert set(thermo["phase"]) == {"normal", "superradiant"}
    assert "fewer than four sizes" in " ".join(_manifest(out)["notes"])


@pytest.mark.parametrize("argv", [
    ["adiabatic-tfi", "--L", "4", "--J", "0.5,1.5"],
    ["adiabatic-zzxz", "--L", "4", "--J", "1.0", "--cd-basis", "commutator"],
    ["adiabatic-alt", "--mode", "ramp_hx", "--L", "4", "--h-x", "0.5"],
    ["adiabatic-alt", "--mode", "zzxz_odd", "--L", "5", "--J", "1.0"],
])
def test_adiabatic_subcommands(tmp_path, argv):
    code, out = _run(tmp_path, *argv, "--T-min", "0.5", "--T-max", "4", "--T-per-decade", "2",
                     "--trace-T", "1", "--samples", "5")
    assert code == 0
    fid = read_csv(out / "fidelity_vs_T.csv")
    assert np.all((fid["fidelity"] >= 0) & (fid["fidelity"] <= 1 + 1e-12))
    summary = read_csv(out / "summary.csv")
    assert set(summary["with_cd"]) == {0.0, 1.0}
    traces = read_csv(out / "traces.csv")
    assert np.all(traces["gap"] >= 0)  # the classical start of the field ramp is degenerate


def test_vqe_tfi(tmp_path):
    code, out = _run(tmp_path, "vqe-tfi", "--L", "4", "--J", "0.2", "--d-max", "2", "--restarts", "2")
    assert code == 0
    s = read_csv(out / "vqe_summary.csv")
    assert s["converged"][0] == 1 and s["fidelity"][0] >= 0.9


def test_vqe_zzxz_writes_magnetization(tmp_path):
    code, out = _run(tmp_path, "vqe-zzxz", "--L", "4", "--J", "2.5", "--h-z", "0", "--d-max", "1",
                     "--restarts", "2")
    assert code == 0
    m = read_csv(out / "magnetization.csv")
    assert list(m["site"]) == [0, 1, 2, 3]


def test_scaling_fit(tmp_path):
    N = np.array([10, 20, 30, 40, 50])
    src = write_csv(tmp_path / "peaks.csv", ["N", "y"], [(n, 1 + 2 * n ** 0.7) for n in N])
    code, out = _run(tmp_path, "scaling-fit", "--input", str(src))
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["exponent"] == pytest.approx(0.7, abs=1e-6)
    assert len(fit["input_sha256"]) == 64


def test_scaling_fit_bad_column(tmp_path, capsys):
    src = write_csv(tmp_path / "p.csv", ["N", "y"], [(n, n) for n in (1, 2, 3, 4)])
    code, _ = _run(tmp_path, "scaling-fit", "--input", str(src), "--value-column", "z")
    assert code == 2
    assert "value_column" in capsys.readouterr().err


def test_scaling_fit_missing_input(tmp_path):
    code, _ = _run(tmp_path, "scaling-fit", "--input", str(tmp_path / "nope.csv"))
    assert code == 2


def test_selftest_passes(capsys):
    assert main(["--selftest"]) == 0
    assert "11/11 checks passed" in capsys.readouterr().out
