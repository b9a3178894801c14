import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commenergy.model import KMH, drag_force
from commenergy.solver import solve
from commenergy.transcription import (InfeasibleScenarioError, Solution, build_program,
                                      check_feasibility, constant_speed_propulsion, delivered_bits,
                                      evaluate_energy, recover_thrust, trapezoid_weights)

from helpers import relay_pair, single_node, two_nodes

# 30-digit reference: 1200 s at 65 km/h with the reference drag
CRUISE_ENERGY = 156079.170128996518


def test_trapezoid_weights():
    t = np.linspace(0.0, 10.0, 6)
    np.testing.assert_allclose(trapezoid_weights(t), [1, 2, 2, 2, 2, 1])
    f = t ** 2
    assert trapezoid_weights(t) @ f == pytest.approx(np.trapezoid(f, t) if hasattr(np, "trapezoid")
                                                     else np.trapz(f, t))


def test_layout_size_single_node():
    prog = build_program(single_node(fixed=False, knots=2))
    assert prog.n == 15
    for q in ("p", "r"):
        assert len(prog.layout.index(q, (1, 0))) == 3
    for q in ("s", "q", "v"):
        assert len(prog.layout.index(q, 1)) == 3


def test_fixed_speed_nodes_drop_kinematics():
    prog = build_program(single_node(fixed=True, knots=2))
    assert prog.n == 9
    assert not prog.layout.has("q", 1)


def test_build_time_speed_infeasibility():
    cfg = single_node(fixed=False, knots=10, v_max=15.0, v_min=5.0, v_init=10.0,
                      q_init=-10833.333333333334, q_final=10833.333333333334)
    with pytest.raises(InfeasibleScenarioError):
        build_program(cfg)


def test_two_node_capacity_rows_per_knot():
    cfg = two_nodes(knots=100)
    prog = build_program(cfg)
    assert prog.n_nonlinear == 3 * 101
    subsets = {lab[2] for lab in prog.ineq_labels[:prog.n_nonlinear]}
    assert subsets == {(1,), (2,), (1, 2)}


def test_unknown_objective():
    with pytest.raises(ValueError):
        build_program(single_node(), objective="speed")


# ---- equality affinity and objective convexity

def _random_points(prog, rng, count):
    lo = prog.x0 * (1 - 0.2 * rng.random((count, prog.n)))
    return np.abs(lo) + 1e-3


def test_equalities_affine():
    prog = build_program(single_node(fixed=False, knots=30))
    rng = np.random.default_rng(3)
    x, y = _random_points(prog, rng, 2)
    mid = prog.A @ (0.5 * (x + y)) - prog.b
    avg = 0.5 * ((prog.A @ x - prog.b) + (prog.A @ y - prog.b))
    np.testing.assert_allclose(mid, avg, rtol=1e-12, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_objective_midpoint_convexity(seed):
    prog = build_program(single_node(fixed=False, knots=20))
    rng = np.random.default_rng(seed)
    x, y = _random_points(prog, rng, 2)
    fx, fy = prog.f(x), prog.f(y)
    assert prog.f(0.5 * (x + y)) <= 0.5 * (fx + fy) + 1e-9 * (1 + abs(fx) + abs(fy))


# ---- thrust recovery and energy accounting

def _solution(t, v, p=None, rate=None, s=None):
    z = np.zeros_like(t)
    return Solution(knot_times=t, x=np.zeros(0), power={(1, 0): z if p is None else p},
                    rate={(1, 0): z if rate is None else rate}, buffer={1: z if s is None else s},
                    position={1: np.cumsum(v)}, speed={1: v})


def test_thrust_constant_speed():
    cfg = single_node()
    t = np.linspace(0, 100, 11)
    v = np.full_like(t, 39.48)
    th = recover_thrust(cfg, _solution(t, v))
    np.testing.assert_allclose(th.thrust[1], drag_force(cfg.drag, 39.48), rtol=1e-12)
    assert th.thrust[1][0] == pytest.approx(2.887, abs=5e-4)


def test_thrust_linear_ramp():
    cfg = single_node()
    t = np.linspace(0, 100, 51)
    v = 18.0 + 0.02 * t
    th = recover_thrust(cfg, _solution(t, v))
    np.testing.assert_allclose(th.acceleration[1], 0.02, rtol=1e-10)
    np.testing.assert_allclose(th.thrust[1], drag_force(cfg.drag, v) + 0.06, rtol=1e-12)
    assert th.min <= th.max


def test_energy_cruise_and_full_power():
    cfg = single_node(knots=200)
    t = cfg.knot_times
    v = np.full_like(t, 65 * KMH)
    e = evaluate_energy(cfg, _solution(t, v, p=np.full_like(t, 100.0)))
    assert e.nodes[1].propulsion == pytest.approx(CRUISE_ENERGY, rel=1e-12)
    assert e.nodes[1].propulsion / 1e3 == pytest.approx(156.07, abs=0.01)
    assert e.transmission == pytest.approx(120000.0, rel=1e-12)
    assert e.nodes[1].kinetic == 0.0
    assert constant_speed_propulsion(cfg, 1) == pytest.approx(CRUISE_ENERGY, rel=1e-12)


def test_kinetic_identity_on_smooth_profile():
    cfg = single_node(knots=400)
    t = cfg.knot_times
    v = 18.0 + 4.0 * np.sin(2 * np.pi * t / 1200.0) + 0.002 * t
    e = evaluate_energy(cfg, _solution(t, v))
    assert e.kinetic_identity_gap < 1e-4 * e.propulsion


# ---- feasibility report

@pytest.fixture(scope="module")
def solved_small():
    cfg = single_node(data_mb=20.0, fixed=False, knots=40)
    sol, stats = solve(build_program(cfg))
    assert stats.status == "optimal"
    return cfg, sol


def test_solver_output_passes(solved_small):
    cfg, sol = solved_small
    assert check_feasibility(cfg, sol).passed


def test_final_buffer_violation_reported(solved_small):
    cfg, sol = solved_small
    buf = dict(sol.buffer)
    buf[1] = buf[1].copy()
    buf[1][-1] = 1.0
    bad = Solution(sol.knot_times, sol.x, sol.power, sol.rate, buf, sol.position, sol.speed, sol.thrust)
    labels = [v[0] for v in check_feasibility(cfg, bad, tol=1e-7).violations]
    assert ("buffer_final", 1) in labels


def test_capacity_violation_reported(solved_small):
    cfg, sol = solved_small
    rate = {(1, 0): sol.rate[(1, 0)].copy()}
    g = cfg.channel.antenna_gain_product / (1000.0 ** 2 + sol.position[1][20] ** 2) ** 1.5
    rate[(1, 0)][20] = 1.01 * 1e5 * np.log2(1 + g * sol.power[(1, 0)][20] / 1e-10)
    bad = Solution(sol.knot_times, sol.x, sol.power, rate, sol.buffer, sol.position, sol.speed, sol.thrust)
    rep = check_feasibility(cfg, bad)
    assert not rep.passed
    assert ("capacity", 0, (1,), 20) in [v[0] for v in rep.violations]


def test_data_conservation(solved_small):
    cfg, sol = solved_small
    assert delivered_bits(cfg, sol) == pytest.approx(cfg.node(1).initial_data, rel=1e-9)


def test_relay_scenario_conserves_data():
    cfg = relay_pair()
    sol, stats = solve(build_program(cfg))
    assert stats.status == "optimal"
    assert check_feasibility(cfg, sol).passed
    total = sum(nd.initial_data for nd in cfg.nodes)
    assert delivered_bits(cfg, sol) == pytest.approx(total, rel=1e-9)
    assert np.all(sol.buffer[1] >= -1e-6 * total)
