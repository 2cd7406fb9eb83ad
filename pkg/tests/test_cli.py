import csv
import json
import os
import subprocess
import sys

import pytest

from psatbounds.cli import EXIT_DOMAIN, EXIT_USAGE, build_parser, main, parse_args


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_examples():
    a = parse_args(["bounds", "--k", "3", "--p", "0.5"])
    assert (a.command, a.k, a.p, a.format) == ("bounds", 3, 0.5, "human")
    a = parse_args(["certify", "--k", "3", "--p", "0.5", "--r", "10", "--grid", "10000"])
    assert a.grid == 10000 and a.room == 1e-4 and a.deriv_safety == 2.0


def test_usage_errors(capsys):
    code, _, err = run(["bounds", "--k", "1", "--p", "0.5"], capsys)
    assert code == EXIT_USAGE and "k >= 2 required" in err
    code, _, err = run(["bounds", "--k", "3", "--p", "1.5"], capsys)
    assert code == EXIT_USAGE and "p <= 1" in err
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--k", "3", "--p", "0.5", "--nope"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["certify", "--k", "3", "--p", "0.5", "--r", "10", "--grid", "ten"])
    assert exc.value.code == EXIT_USAGE
    code, _, _ = run(["certify", "--k", "3", "--p", "0.5", "--r", "10", "--grid", "10"], capsys)
    assert code == EXIT_USAGE


def test_domain_error_exit(capsys):
    code, _, err = run(["experiment", "psat", "--k", "3", "--p", "0.5", "--n", "30",
                        "--r", "2", "--samples", "2"], capsys)
    assert code == EXIT_DOMAIN and "domain error" in err


def test_help_shows_defaults():
    text = build_parser()._subparsers._group_actions[0].choices["certify"].format_help()
    for token in ("10000", "0.0001", "2.0", "PSAT_THREADS"):
        assert token in text


def test_bounds_outputs(capsys):
    code, out, _ = run(["bounds", "--k", "3", "--p", "0.5"], capsys)
    assert code == 0 and "32.452" in out and "leading order" in out
    code, out, err = run(["bounds", "--k", "3", "--p", "0.5", "--format", "json"], capsys)
    rec = json.loads(out)
    assert rec["upper_lemma2"] == pytest.approx(32.452050359265929)
    assert rec["t_k"] is None and rec["t_k_vacuous"]
    assert "manifest" in json.loads(err)
    code, out, _ = run(["bounds", "--k", "2", "--p", "1.0"], capsys)
    assert code == 0 and "k=2, p=1" in out


def test_verify(capsys):
    code, out, _ = run(["verify", "--suite", "oracles"], capsys)
    assert code == 0 and "all checks passed" in out


def test_curve_csv(tmp_path, capsys):
    out = tmp_path / "k3.csv"
    plot = tmp_path / "k3.gp"
    code, _, _ = run(["curve", "--k", "3", "--q-min", "0.1", "--q-max", "0.9", "--points", "3",
                      "--grid", "500", "--out", str(out), "--gnuplot", str(plot)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 and rows[1]["q"] == "0.5"
    for r in rows:
        if r["status"] == "certified":
            assert float(r["certified_lower"]) < float(r["upper_lemma2"])
        assert len(r["T_k"].replace(".", "").lstrip("0")) <= 6
    assert (tmp_path / "k3.csv.manifest.json").exists()
    assert "plot" in plot.read_text()


def test_experiment_psat(tmp_path, capsys):
    out = tmp_path / "psat.json"
    code, _, _ = run(["experiment", "psat", "--k", "3", "--n", "12", "--r", "4", "--p", "0.5",
                      "--samples", "10", "--seed", "7", "--solver", "exact", "--out", str(out),
                      "--dimacs", str(tmp_path / "cnf")], capsys)
    assert code == 0
    rec = json.loads(out.read_text())
    assert rec["seed"] == 7 and "frequency" in rec and len(rec["values"]) == 10
    man = json.loads((tmp_path / "psat.json.manifest.json").read_text())
    assert man["seed"] == 7 and man["version"] and "wall_clock_seconds" in man
    assert len(os.listdir(tmp_path / "cnf")) == 10


def test_experiment_other_kinds(capsys):
    code, out, _ = run(["experiment", "moments", "--k", "3", "--p", "0.5", "--n", "6",
                        "--m", "10", "--samples", "200", "--seed", "1"], capsys)
    rec = json.loads(out)
    assert code == 0 and abs(rec["mean_x"] - rec["exact_mean_x"]) <= 5 * rec["stderr_x"]
    code, out, _ = run(["experiment", "concentration", "--k", "3", "--n", "10", "--m", "30",
                        "--samples", "50", "--t", "0", "3"], capsys)
    assert code == 0 and len(json.loads(out)["tails"]) == 2
    code, out, _ = run(["experiment", "sample", "--k", "3", "--n", "10", "--m", "30",
                        "--samples", "5", "--model", "proper"], capsys)
    assert code == 0 and json.loads(out)["mean"] == 0


def _cli(args, threads, out):
    env = dict(os.environ, PSAT_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "psatbounds.cli", *args, "--out", str(out)],
                   check=True, env=env, capture_output=True)
    return out.read_bytes()


def test_byte_identical_across_threads(tmp_path):
    cert = ["certify", "--k", "3", "--p", "0.5", "--r", "10", "--grid", "300"]
    exp = ["experiment", "psat", "--k", "3", "--n", "12", "--r", "5", "--p", "0.5",
           "--samples", "70", "--seed", "3"]
    for args in (cert, exp):
        outs = {_cli(args, t, tmp_path / f"o{t}.json") for t in (1, 2, os.cpu_count() or 1)}
        assert len(outs) == 1
