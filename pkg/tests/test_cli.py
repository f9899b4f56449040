import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from netshuffle.cli import SWEEP_COLUMNS, main, parse_grid, rounded
from netshuffle.graph import build_graph, walk_distributions


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_graph_info_complete(capsys):
    code, out, err = run(["graph", "info", "--topology", "complete", "--n", "5", "--eps0", "1"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["spectral_gap"] == 0.75 and rep["ergodic"] and rep["recommended_T"] == 10
    assert "config:" in err


def test_graph_info_cycle_not_ergodic(capsys):
    rep = json.loads(run(["graph", "info", "--topology", "cycle", "--n", "4"], capsys)[1])
    assert rep["ergodic"] is False and rep["bipartite"] is True


def test_graph_info_edge_file_matches_topology(tmp_path, capsys):
    f = tmp_path / "k3.txt"
    f.write_text("0 1\n1 2\n0 2\n")
    a = run(["graph", "info", "--edges", str(f), "--eps0", "1"], capsys)[1]
    b = run(["graph", "info", "--topology", "complete", "--n", "3", "--eps0", "1"], capsys)[1]
    assert a == b


def test_graph_info_parse_error_reports_line(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("0 1\n# note\n2 2\n")
    code, out, err = run(["graph", "info", "--edges", str(f)], capsys)
    assert code != 0 and "line 3" in err and out == ""


def test_bounds_compute(capsys):
    rep = json.loads(run(["bounds", "compute", "--model", "fmt", "--eps0", "1", "--n", "10000",
                          "--delta", "1e-6"], capsys)[1])
    assert abs(rep["eps"] - 0.2140) < 1e-4
    assert {"model", "inputs", "eps", "delta", "valid", "validity_condition"} <= rep.keys()
    sub = json.loads(run(["bounds", "compute", "--model", "subsample_wor", "--eps", "0.6931", "--l", "50",
                          "--n", "100", "--delta", "1e-6"], capsys)[1])
    assert abs(sub["eps"] - 0.4055) < 1e-4


def test_bounds_compute_invalid_region_exits_zero(capsys):
    code, out, _ = run(["bounds", "compute", "--model", "fmt", "--eps0", "1", "--n", "100",
                        "--delta", "1e-6"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["valid"] is False and rep["eps"] is None


def test_bounds_compute_liew(capsys):
    rep = json.loads(run(["bounds", "compute", "--model", "liew_metric", "--topology", "complete",
                          "--n", "4"], capsys)[1])
    assert rep["eps"] == 0.5


def test_bounds_sweep(capsys):
    code, out, _ = run(["bounds", "sweep", "--model", "netshuffle,smpl_wlk", "--eps0", "1",
                        "--n", "1000:100000:log", "--p", "0.1", "--delta", "1e-6"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert out.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    ns = {int(r["n"]): float(r["eps"]) for r in rows if r["model"] == "netshuffle" and r["valid"] == "true"}
    sw = {int(r["n"]): float(r["eps"]) for r in rows if r["model"] == "smpl_wlk" and r["valid"] == "true"}
    assert sw and all(sw[n] < ns[n] for n in sw)
    assert any(r["valid"] == "false" and r["eps"] == "" for r in rows)


def test_parse_grid():
    assert parse_grid("1000:100000:log", int)[0] == 1000
    assert parse_grid("1000:100000:log", int)[-1] == 100000
    assert parse_grid("0.1:0.5:0.1") == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    assert parse_grid("1,2,5") == [1.0, 2.0, 5.0]
    assert parse_grid(None) == [None]


def test_simulate_identity_zero_steps(capsys):
    code, out, _ = run(["simulate", "--protocol", "rnd_wlk", "--topology", "complete", "--n", "3",
                        "--randomizer", "identity", "--T", "0", "--trials", "1", "--seed", "4"], capsys)
    assert code == 0
    assert json.loads(out)["per_client"] == [[0], [1], [2]]


def test_simulate_seed_drawn_and_printed(capsys):
    _, out, err = run(["simulate", "--topology", "complete", "--n", "3", "--T", "2"], capsys)
    seed = int(next(line for line in err.splitlines() if line.startswith("seed:")).split()[1])
    assert json.loads(out)["seed"] == seed


def test_simulate_non_ergodic_auto_fails(capsys):
    code, _, err = run(["simulate", "--topology", "cycle", "--n", "4", "--seed", "1"], capsys)
    assert code != 0 and "non-bipartite" in err


def test_simulate_summary_matches_walk_distribution(capsys):
    g = build_graph(4, [(0, 1), (1, 2), (0, 2), (0, 3)])
    code, out, _ = run(["simulate", "--topology", "complete", "--n", "4", "--randomizer", "identity",
                        "--T", "3", "--trials", "100000", "--seed", "8", "--summary",
                        "--precision", "17", "--workers", "3"], capsys)
    rep = json.loads(out)
    F, E = np.array(rep["frequencies"]), np.array(rep["expected"])
    sigma = np.sqrt(E * (1 - E) / 1e5)
    assert np.all(np.abs(F - E) <= 3 * sigma + 1e-12)
    assert g.n == 4


def test_simulate_sampling_and_restricted(capsys):
    _, out, _ = run(["simulate", "--protocol", "smpl_wlk", "--sample-p", "0", "--topology", "complete",
                     "--n", "4", "--T", "2", "--trials", "3", "--seed", "1"], capsys)
    assert all(json.loads(line)["per_client"] == [[]] * 4 for line in out.splitlines())
    _, out, _ = run(["simulate", "--protocol", "restricted", "--clients", "0,2", "--topology", "complete",
                     "--n", "4", "--T", "2", "--trials", "3", "--seed", "1"], capsys)
    assert all(sum(map(len, json.loads(line)["per_client"])) == 2 for line in out.splitlines())


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"topology": "complete", "n": 3, "T": 0, "randomizer": "identity",
                               "trials": 2, "seed": 5}))
    _, out, err = run(["simulate", "--config", str(cfg)], capsys)
    assert len(out.splitlines()) == 2
    _, out, _ = run(["simulate", "--config", str(cfg), "--trials", "4"], capsys)
    assert len(out.splitlines()) == 4
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"topolgy": "complete"}))
    code, _, err = run(["simulate", "--config", str(bad)], capsys)
    assert code != 0 and "topolgy" in err


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bounds", "compute", "--model", "fmt", "--epsilon0", "1"])
    assert info.value.code != 0


def test_out_file(tmp_path, capsys):
    target = tmp_path / "o.json"
    _, out, _ = run(["graph", "info", "--topology", "complete", "--n", "3", "--out", str(target)], capsys)
    assert out == "" and json.loads(target.read_text())["n"] == 3


def test_precision():
    assert rounded({"x": 0.123456789, "y": [math.inf, 2]}, 3) == {"x": 0.123, "y": ["inf", 2]}


@pytest.mark.parametrize("suite", ["lemma1", "mixing", "ldp", "concentration", "empirical-dp"])
def test_verify_suites_pass(suite, capsys):
    code, out, _ = run(["verify", suite, "--seed", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert all({"observed", "bound", "pass"} <= c.keys() for c in rep["checks"])


def test_verify_mixing_random_graph(capsys):
    code, out, _ = run(["verify", "mixing", "--topology", "erdos_renyi", "--n", "50", "--p", "0.2",
                        "--seed", "1"], capsys)
    assert code == 0 and json.loads(out)["pass"]


def test_verify_mixing_failure_exits_nonzero(tmp_path, capsys):
    f = tmp_path / "g.txt"
    f.write_text("0 1\n0 3\n0 4\n1 2\n1 3\n1 4\n2 3\n2 4\n3 4\n4 5\n")
    code, out, _ = run(["verify", "mixing", "--edges", str(f), "--seed", "1"], capsys)
    assert code == 1 and not json.loads(out)["pass"]


def test_verify_budget_skip_and_strict(capsys):
    code, out, _ = run(["verify", "empirical-dp", "--budget", "10", "--seed", "1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["checks"][0]["status"].startswith("skipped")
    assert rep["checks"][0]["pass"] is None
    code, _, _ = run(["verify", "empirical-dp", "--budget", "10", "--seed", "1", "--strict"], capsys)
    assert code == 1


def test_verify_all_defaults(capsys):
    code, out, _ = run(["verify", "all", "--budget", "1e6", "--seed", "3"], capsys)
    assert code == 0 and json.loads(out)["pass"]


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "netshuffle", *args], capture_output=True, check=False)


def test_determinism_across_processes_and_workers():
    sim = ["simulate", "--topology", "erdos_renyi", "--n", "12", "--p", "0.4", "--randomizer", "kary_rr",
           "--k", "3", "--T", "5", "--trials", "3000", "--seed", "42"]
    a = _cli(*sim, "--workers", "1")
    b = _cli(*sim, "--workers", "4")
    assert a.returncode == 0 and a.stdout and a.stdout == b.stdout
    ver = ["verify", "all", "--seed", "9", "--budget", "1e6"]
    c, d = _cli(*ver), _cli(*ver, "--workers", "4")
    assert c.returncode == 0 and c.stdout == d.stdout


def test_bounds_liew_bipartite_warning_in_notes(capsys):
    code, out, err = run(["bounds", "compute", "--model", "liew_metric", "--topology", "star", "--n", "50"],
                         capsys)
    rep = json.loads(out)
    assert code == 0 and "bipartite" in rep["notes"]["warnings"][0]
    assert "RuntimeWarning" not in err


def test_output_identical_across_backends():
    import os

    argv = [sys.executable, "-m", "netshuffle", "simulate", "--topology", "complete", "--n", "5",
            "--randomizer", "kary_rr", "--k", "3", "--T", "auto", "--trials", "500", "--seed", "2"]
    env = dict(os.environ, NETSHUFFLE_NUMBA="0")
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True, env=env).stdout
    assert a and a == b
