import json
import math

import numpy as np
import pytest

from swingski import integrate as ig
from swingski import synthesis as sy
from swingski.elliptic import turnpike_origin
from swingski.errors import NoIntersection, TargetUnreachable
from swingski.models import SwingParams, make_swing_pair
from swingski.oracle import grid_oracle
from swingski.vecfield import lie_bracket


@pytest.fixture(scope="module")
def turnpike_case():
    params = SwingParams(0.1, 5.0)
    pair = make_swing_pair(params).pair
    origin = turnpike_origin(params, math.pi + 0.1)
    res = sy.solve_mayer(pair, origin, 1.5 * math.pi, s_grid=40, backbones=("turnpike",))
    return params, pair, origin, res


@pytest.fixture(scope="module")
def q_case():
    params = SwingParams(1.0, 2.0)
    pair = make_swing_pair(params).pair
    origin, target = np.array([0.933, -1.709]), 0.269
    return params, pair, origin, target, sy.solve_mayer(pair, origin, target, s_grid=40)


def test_seed_covector_properties(swing12):
    _, env = swing12
    pair = env.pair
    x = np.array([0.4, 1.2])
    for u in (1.0, -1.0):
        lam = sy.seed_covector(pair, x, u)
        if lam is None:
            continue
        assert lam @ pair.G(x) == pytest.approx(0.0, abs=1e-14)
        assert np.linalg.norm(lam) == pytest.approx(1.0)
        assert lam @ pair.F(x) >= 0
        assert u * (lam @ lie_bracket(pair, x)) > 0


def test_structure_in_ordinary_region(swing12):
    _, env = swing12
    pair = env.pair
    x0 = np.array([0.5, 1.0])
    # near (0.5, 1) with x2 sin x1 > 0 the swing has f < 0
    yx = ig.integrate_schedule(pair, x0, [(ig.BANG_PLUS, 0.02), (ig.BANG_MINUS, 0.02)])
    xy = ig.integrate_schedule(pair, x0, [(ig.BANG_MINUS, 0.02), (ig.BANG_PLUS, 0.02)])
    v1, v2 = sy.structure_check(pair, yx), sy.structure_check(pair, xy)
    assert v1.region == "ordinary f<0" and v1.admissible
    assert v2.region == "ordinary f<0" and not v2.admissible
    box = sy.structure_check(pair, xy, region=[0.3, 0.7, -1.5, -0.5], samples=9)
    assert box.region == "ordinary f>0" and box.admissible


def test_q_instance_matches_oracle(q_case):
    params, pair, origin, target, res = q_case
    assert res.original_exists and not res.contains_singular
    assert res.optimal.trajectory.pattern == "XY"
    assert res.transversality_residual < 1e-6
    end = res.optimal.trajectory.end
    assert end[0] == pytest.approx(target, abs=1e-9)
    assert abs(res.optimal.covector(res.value)[1]) < 1e-6
    assert ig.pmp_residual(res.optimal, pair) < 1e-6
    orc = grid_oracle(params, origin, target)
    assert abs(res.value - orc.value) <= 1e-4
    assert res.value <= orc.value + 1e-12


def test_result_json_round_trip(q_case, tmp_path):
    *_, res = q_case
    sy.write_result(res, tmp_path / "r.json", tmp_path / "c.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["value"] == res.value
    assert [a["label"] for a in doc["arcs"]] == [ig.BANG_MINUS, ig.BANG_PLUS]
    assert (tmp_path / "c.csv").read_text().startswith("family,s,t_s,psi,pattern\n")


def test_parallel_map_is_deterministic(q_case):
    _, pair, origin, target, res = q_case
    again = sy.solve_mayer(pair, origin, target, s_grid=40, jobs=3)
    assert again.to_json() == res.to_json()


def test_zero_time_and_unreachable(swing12):
    _, env = swing12
    res = sy.solve_mayer(env.pair, [0.3, 1.0], 0.3)
    assert res.value == 0.0 and res.original_exists
    # the rest point at the bottom never moves
    with pytest.raises(TargetUnreachable):
        sy.solve_mayer(env.pair, [0.0, 0.0], 1.0, s_grid=10, max_time=2.0)


def test_turnpike_scenario(turnpike_case):
    params, pair, origin, res = turnpike_case
    assert res.optimal.trajectory.pattern == "ZY"
    assert res.contains_singular and not res.original_exists
    assert res.value == pytest.approx(0.0731904, abs=1e-6)
    sched = res.near_optimal_original
    assert sched["gap"] <= 1e-3 and sched["time"] >= res.value - 1e-9
    replay = ig.integrate_schedule(pair, origin, [(l, d) for l, d in sched["schedule"]])
    assert replay.end[0] == pytest.approx(1.5 * math.pi, abs=1e-7)
    assert replay.T == pytest.approx(sched["time"], abs=1e-9)


def test_feedback_reparameterization_is_slower(turnpike_case):
    params, pair, _, res = turnpike_case
    fb = sy.compare_feedback(params, pair, res.optimal)
    assert fb.T_gamma == pytest.approx(res.value, rel=1e-8)
    assert fb.T_eta > fb.T_gamma


def test_feedback_of_bang_path_equals_its_time(q_case):
    params, pair, _, _, res = q_case
    fb = sy.compare_feedback(params, pair, res.optimal)
    assert fb.T_gamma == pytest.approx(res.value, abs=1e-9)
    assert fb.T_eta == pytest.approx(res.value, abs=1e-9)


def test_bang_bang_approximation_bound(turnpike_case):
    _, pair, _, res = turnpike_case
    z = [a for a in res.optimal.trajectory.arcs if a.label == ig.SINGULAR][0]
    gaps = []
    for n in (8, 16):
        ap = sy.bang_bang_approximation(pair, z, n)
        assert ap.deviation <= ap.bound
        assert ap.trajectory.end == pytest.approx(z.end, abs=1e-8)
        assert ap.trajectory.pattern == "YX" * n
        gaps.append(ap.time_gap)
    assert gaps[1] <= gaps[0]
    with pytest.raises(ValueError):
        sy.bang_bang_approximation(pair, res.optimal.trajectory.arcs[-1], 4)


def test_epsilon_schedule_without_singular_arc(q_case):
    _, pair, *_, res = q_case
    assert sy.epsilon_schedule(pair, res.optimal, 1e-3) is None


def test_monotone_pieces_split_at_turns(swing12):
    _, env = swing12
    arc = ig.integrate_arc(env.pair, [0.2, 1.0], ig.BANG_PLUS, 2.5)
    pieces = sy.monotone_pieces(env.pair, arc)
    for ta, tb in pieces[:-1]:
        assert abs(arc.state(tb)[1]) < 1e-9
    assert pieces[0][0] == arc.t0 and pieces[-1][1] == arc.t1


def test_switching_curves_cover_candidates(q_case):
    _, pair, origin, target, _ = q_case
    fam = sy.build_family(pair, origin, "X", s_grid=20, target=target)
    curves = sy.switching_curves(fam)
    assert curves
    for c in curves:
        assert c.points.shape[1] == 2
