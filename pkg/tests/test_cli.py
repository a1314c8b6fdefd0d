import csv
import json
import math

import numpy as np
import pytest

from swingski import cli, synthesis
from swingski import integrate as ig
from swingski.errors import NoTransversalRoot
from swingski.models import SwingParams, make_swing_pair

TURNPIKE_X1 = math.pi + 0.1


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, cfg, command, *extra, out="out"):
    outdir = tmp_path / out
    code = cli.main([command, "--config", cfg, "--out", str(outdir), *extra])
    return code, outdir


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def check_trajectory_file(path, pair=None):
    """Re-load a trajectory CSV and check the path invariants.

    Times never decrease, a repeated time marks an arc junction where the
    state must be continuous, and consecutive bang samples are joined by
    the bang flow itself.
    """
    data = ig.load_csv(path)
    pair = pair or make_swing_pair(SwingParams()).pair
    dt = np.diff(data[:, 0])
    assert np.all(dt >= 0)
    for i in np.flatnonzero(dt == 0):
        np.testing.assert_allclose(data[i, 1:3], data[i + 1, 1:3], atol=1e-12)
    for i in np.flatnonzero(dt > 0):
        u = data[i, 3]
        if u == data[i + 1, 3] and abs(u) == 1.0:
            arc = ig.integrate_arc(pair, data[i, 1:3], ig.bang_label(u), dt[i])
            np.testing.assert_allclose(arc.end, data[i + 1, 1:3], atol=1e-7)
    return data


@pytest.mark.parametrize("r_plus,verdict", [(2.0, "yes"), (1.5, "no")])
def test_analyze_golden_verdict(tmp_path, capsys, r_plus, verdict):
    cfg = write(tmp_path, "c.json", {"model": "swing", "swing": {"r_minus": 1.0, "r_plus": r_plus},
                                      "analyze": {"window": [1.6, 4.6, 0.0, 10.0]}})
    code, out = run(tmp_path, cfg, "analyze")
    assert code == 0
    assert f"regular turnpike reaches x1=pi: {verdict}" in capsys.readouterr().out
    rows = read_rows(out / "loci.csv")
    assert rows[0] == ["x1", "x2", "delta_a", "delta_b", "phi", "regular_flag"]
    assert len(rows) > 100
    assert {r[5] for r in rows[1:]} <= {"0", "1"}


def test_analyze_empty_window(tmp_path):
    cfg = write(tmp_path, "c.json", {"model": "swing", "analyze": {"window": [1.0, 1.0, 0.0, 0.0]}})
    code, out = run(tmp_path, cfg, "analyze")
    assert code == 0
    assert (out / "loci.csv").read_text() == "x1,x2,delta_a,delta_b,phi,regular_flag\n"


def test_analyze_ski_reports_validity(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"model": "ski", "ski": {"c": 0.05},
                                      "analyze": {"window": [63.0, 125.0, -100.0, 100.0]}})
    code, _ = run(tmp_path, cfg, "analyze")
    assert code == 0
    assert "condition uc<=1: ok" in capsys.readouterr().out


def test_config_errors(tmp_path):
    bad = write(tmp_path, "bad.json", {"model": "swing", "swing": {"r_minus": 2.0, "r_plus": 1.0}})
    assert run(tmp_path, bad, "analyze")[0] == 2
    assert run(tmp_path, str(tmp_path / "missing.json"), "analyze")[0] == 2
    other = write(tmp_path, "other.json", {"model": "rope"})
    assert run(tmp_path, other, "analyze")[0] == 2
    nosched = write(tmp_path, "n.json", {"model": "swing", "simulate": {"schedule": []}})
    assert run(tmp_path, nosched, "simulate")[0] == 2


def test_simulate_original_radius_matches_bang_arc(tmp_path):
    cfg = write(tmp_path, "c.json", {"model": "swing", "simulate": {
        "system": "original", "origin": [0.5, 1.0], "schedule": [{"v": 1.0, "duration": 0.4}]}})
    code, out = run(tmp_path, cfg, "simulate")
    assert code == 0
    data = check_trajectory_file(out / "trajectory.csv")
    pair = make_swing_pair(SwingParams()).pair
    arc = ig.integrate_arc(pair, [0.5, 1.0], ig.BANG_PLUS, 0.4)
    np.testing.assert_allclose(data[-1, 1:3], arc.end, atol=1e-9)
    np.testing.assert_allclose(data[:, 3], 1.0, atol=1e-9)


def test_simulate_zero_duration(tmp_path):
    cfg = write(tmp_path, "c.json", {"model": "swing", "simulate": {
        "origin": [0.5, 1.0], "schedule": [{"u": 1, "duration": 0.0}]}})
    code, out = run(tmp_path, cfg, "simulate")
    assert code == 0
    assert (out / "trajectory.csv").read_text() == ",".join(ig.CSV_COLUMNS) + "\n"


Q_DOC = {"model": "swing", "swing": {"r_minus": 1.0, "r_plus": 2.0},
         "synthesize": {"origin": [0.933, -1.709], "target": 0.269}}


def test_synthesize_q_with_oracle(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", Q_DOC)
    code, out = run(tmp_path, cfg, "synthesize", "--grid", "40", "--oracle")
    assert code == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["original_exists"] is True
    assert all(a["label"] in (ig.BANG_PLUS, ig.BANG_MINUS) for a in doc["arcs"])
    assert doc["oracle_gap"] <= 1e-4
    assert not (out / "epsilon_schedule.csv").exists()
    check_trajectory_file(out / "trajectory.csv")


def test_synthesize_is_deterministic(tmp_path):
    cfg = write(tmp_path, "c.json", Q_DOC)
    _, a = run(tmp_path, cfg, "synthesize", "--grid", "30", out="a")
    _, b = run(tmp_path, cfg, "synthesize", "--grid", "30", "--jobs", "2", out="b")
    for name in ("result.json", "candidates.csv", "trajectory.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_original_schedule_round_trip(tmp_path):
    cfg = write(tmp_path, "c.json", Q_DOC)
    _, out = run(tmp_path, cfg, "synthesize", "--grid", "30")
    doc = json.loads((out / "result.json").read_text())
    radius = {ig.BANG_PLUS: 1.0, ig.BANG_MINUS: 2.0}
    sched = [{"v": radius[a["label"]], "duration": a["t1"] - a["t0"]} for a in doc["arcs"]]
    sim = write(tmp_path, "s.json", {"model": "swing", "simulate": {"system": "original", "origin": [0.933, -1.709], "schedule": sched}})
    code, sout = run(tmp_path, sim, "simulate", out="sim")
    assert code == 0
    data = ig.load_csv(sout / "trajectory.csv")
    ref = ig.load_csv(out / "trajectory.csv")
    np.testing.assert_allclose(data[-1, 1:3], ref[-1, 1:3], atol=1e-6)


@pytest.fixture(scope="module")
def turnpike_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("tp")
    cfg = write(tmp, "c.json", {"model": "swing", "swing": {"r_minus": 0.1, "r_plus": 5.0},
                                "synthesize": {"origin": [TURNPIKE_X1, 0.0], "target": 1.5 * math.pi, "on_turnpike": True}})
    code, out = run(tmp, cfg, "synthesize", "--grid", "40")
    return tmp, code, out


def test_synthesize_turnpike_emits_schedule(turnpike_run):
    _, code, out = turnpike_run
    assert code == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["original_exists"] is False
    assert doc["feedback"]["T_eta"] > doc["feedback"]["T_gamma"]
    rows = read_rows(out / "epsilon_schedule.csv")
    assert rows[0] == ["label", "duration", "original_control"]
    assert {r[2] for r in rows[1:]} <= {"0.10000000000000001", "5"}
    assert sum(float(r[1]) for r in rows[1:]) == pytest.approx(doc["near_optimal_original"]["time"])


def test_compare_turnpike(turnpike_run):
    tmp, _, out = turnpike_run
    cfg = write(tmp, "cmp.json", {"compare": {"result": str(out)}})
    code, cout = run(tmp, cfg, "compare", out="cmp")
    assert code == 0
    table = {r[0]: float(r[1]) for r in read_rows(cout / "compare.csv")[1:]}
    assert table["T_eta"] > table["T_gamma"]
    assert table["T_ode"] == pytest.approx(table["T_gamma"], abs=1e-6)
    assert table["T_elliptic"] == pytest.approx(table["T_ode"], abs=1e-6)


def test_compare_bang_only_agrees(tmp_path):
    cfg = write(tmp_path, "c.json", Q_DOC)
    _, out = run(tmp_path, cfg, "synthesize", "--grid", "30")
    cmp_cfg = write(tmp_path, "cmp.json", {"compare": {"result": str(out / "result.json")}})
    code, cout = run(tmp_path, cmp_cfg, "compare", out="cmp")
    assert code == 0
    table = {r[0]: float(r[1]) for r in read_rows(cout / "compare.csv")[1:]}
    times = [table[k] for k in ("T_gamma", "T_eta", "T_elliptic", "T_ode")]
    assert max(times) - min(times) <= 1e-6


def test_compare_errors(tmp_path):
    missing = write(tmp_path, "m.json", {"compare": {"result": str(tmp_path / "nothing.json")}})
    assert run(tmp_path, missing, "compare")[0] == 2
    (tmp_path / "bad.json").write_text(json.dumps({"value": 1.0}))
    wrong = write(tmp_path, "w.json", {"compare": {"result": str(tmp_path / "bad.json")}})
    assert run(tmp_path, wrong, "compare")[0] == 2


def test_exit_code_unreachable(tmp_path):
    cfg = write(tmp_path, "c.json", {"model": "swing", "synthesize": {"origin": [0.0, 0.0], "target": 1.0}})
    assert run(tmp_path, cfg, "synthesize", "--grid", "10")[0] == 4


def test_exit_code_no_root(tmp_path, monkeypatch):
    def fail(*a, **k):
        raise NoTransversalRoot("none", psi_endpoints=(1.0, 2.0), best=None)

    monkeypatch.setattr(synthesis, "solve_mayer", fail)
    cfg = write(tmp_path, "c.json", Q_DOC)
    assert run(tmp_path, cfg, "synthesize")[0] == 5


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for flag in ("--model", "--config", "--out", "--tol", "--oracle", "--grid", "--jobs"):
        assert flag in text
