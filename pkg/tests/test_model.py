import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from commenergy.model import (KMH, ChannelParams, DragModel, LinkGeometry, ModelError, ScenarioError,
                              SingularGeometryError, channel_gain, drag_force, drag_from_physical,
                              drag_power, gain_profile, propulsion_power, scenario_to_dict,
                              validate_scenario)

from helpers import REFERENCE_DRAG

DRAG = DragModel(**REFERENCE_DRAG)
# 30-digit evaluations (mpmath) of the drag model at the reference coefficients
OMEGA_65KMH = 7.20365400595368544
POWER_65KMH = 130.065975107497098
MIN_DRAG_SPEED = 39.4814307836468539
MIN_DRAG = 2.88686681369265804
MIN_POWER_SPEED = 29.9994000299982001


# ---- channel gain

def test_gain_unit_distance():
    assert channel_gain(ChannelParams(path_loss_exponent=2.7), LinkGeometry(1.0, 0.0, 0.0)) == 1.0


def test_gain_straight_below():
    assert channel_gain(ChannelParams(), LinkGeometry(1000.0, 0.0, 0.0)) == pytest.approx(1e-9, rel=1e-12)


def test_gain_with_lateral_offset():
    g = channel_gain(ChannelParams(), LinkGeometry(1000.0, 1000.0, 0.0))
    assert g == pytest.approx(3.53553390593273762e-10, rel=1e-12)


def test_gain_singular_geometry():
    with pytest.raises(SingularGeometryError):
        channel_gain(ChannelParams(), LinkGeometry(0.0, 0.0, 0.0))


coord = st.floats(-5e4, 5e4, allow_nan=False)


@given(a=st.floats(1.0, 5e3), d=coord, q=coord, alpha=st.floats(1.0, 4.0))
def test_gain_symmetric_and_scaling(a, d, q, alpha):
    ch = ChannelParams(path_loss_exponent=alpha)
    g = channel_gain(ch, LinkGeometry(a, d, q))
    assert channel_gain(ch, LinkGeometry(a, d, -q)) == g
    g2 = channel_gain(ch, LinkGeometry(2 * a, 2 * d, 2 * q))
    assert g2 == pytest.approx(g * 2.0 ** (-2 * alpha), rel=1e-12)


@given(a=st.floats(1.0, 5e3), d=coord, q1=coord, q2=coord)
def test_gain_non_increasing_in_separation(a, d, q1, q2):
    ch = ChannelParams()
    near, far = sorted((abs(q1), abs(q2)))
    assert channel_gain(ch, LinkGeometry(a, d, far)) <= channel_gain(ch, LinkGeometry(a, d, near))


def test_gain_profile_matches_scalar():
    ch = ChannelParams(antenna_gain_product=2.5)
    q = np.linspace(-3000.0, 3000.0, 7)
    ref = [channel_gain(ch, LinkGeometry(900.0, 200.0, x)) for x in q]
    np.testing.assert_allclose(gain_profile(ch, 900.0, 200.0, q), ref, rtol=1e-14)


# ---- drag

def test_drag_at_minimum_drag_speed():
    assert drag_force(DRAG, 39.48) == pytest.approx(MIN_DRAG, rel=1e-6)
    assert drag_force(DRAG, MIN_DRAG_SPEED) == pytest.approx(MIN_DRAG, rel=1e-12)


def test_drag_at_65kmh():
    assert drag_force(DRAG, 65 * KMH) == pytest.approx(OMEGA_65KMH, rel=1e-12)
    assert drag_force(DRAG, 65 * KMH) == pytest.approx(7.200, abs=5e-3)


def test_pure_quadratic_drag():
    assert drag_force(DragModel(1.0, 0.0), 2.0) == 4.0
    assert drag_force(DragModel(1.0, 0.0), 0.0) == 0.0


def test_drag_domain_errors():
    with pytest.raises(ModelError):
        drag_force(DRAG, -1.0)
    with pytest.raises(ModelError):
        drag_force(DRAG, 0.0)


speed = st.floats(1e-3, 200.0)


@given(v1=speed, v2=speed)
def test_drag_power_midpoint_convex(v1, v2):
    mid = drag_power(DRAG, 0.5 * (v1 + v2))
    avg = 0.5 * (drag_power(DRAG, v1) + drag_power(DRAG, v2))
    assert mid <= avg * (1 + 1e-12)


def test_drag_from_physical_examples():
    d = drag_from_physical(1.225, 0.1, 1.0, 1.0, 10.0, 3.0)
    assert d.parasitic_coefficient == pytest.approx(0.06125, rel=1e-12)
    d2 = drag_from_physical(1.225, 0.05, 2.0, 1.0, 10.0, 3.0)
    assert d2.parasitic_coefficient == pytest.approx(d.parasitic_coefficient, rel=1e-14)
    d3 = drag_from_physical(1.225, 0.1, 0.5, 0.9, 6.0, 3.0, 9.81)
    assert d3.induced_coefficient == pytest.approx(166.709670953860666, rel=1e-12)


@given(rho=st.floats(0.1, 2.0), cd0=st.floats(0.01, 1.0), s=st.floats(0.05, 5.0),
       e=st.floats(0.5, 1.0), ar=st.floats(2.0, 20.0), m=st.floats(0.1, 20.0), v=st.floats(1.0, 80.0))
def test_drag_from_physical_matches_direct_formula(rho, cd0, s, e, ar, m, v):
    d = drag_from_physical(rho, cd0, s, e, ar, m)
    w = m * 9.81
    direct = 0.5 * rho * v ** 2 * s * cd0 + 2 * w ** 2 / (math.pi * e * ar * rho * s * v ** 2)
    assert drag_force(d, v) == pytest.approx(direct, rel=1e-12)


def test_drag_from_physical_rejects_non_positive():
    with pytest.raises(ScenarioError):
        drag_from_physical(1.225, 0.0, 1.0, 1.0, 10.0, 3.0)


# ---- propulsion

def test_propulsion_power_cruise():
    assert propulsion_power(DRAG, 3.0, 65 * KMH, 0.0) == pytest.approx(POWER_65KMH, rel=1e-12)


def test_propulsion_power_zero_thrust():
    v = 23.0
    assert propulsion_power(DRAG, 3.0, v, -drag_force(DRAG, v) / 3.0) == pytest.approx(0.0, abs=1e-12)


def test_propulsion_power_pure_kinetic():
    assert propulsion_power(DragModel(0.0, 0.0), 2.0, 3.0, 1.0) == 6.0


def test_propulsion_power_minimiser():
    res = minimize_scalar(lambda v: propulsion_power(DRAG, 3.0, v, 0.0), bounds=(1.0, 100.0),
                          method="bounded", options={"xatol": 1e-10})
    assert res.x == pytest.approx(MIN_POWER_SPEED, rel=1e-6)
    assert res.x == pytest.approx((2250 / (3 * 9.26e-4)) ** 0.25, rel=1e-6)


# ---- scenario validation

def _raw(**over):
    raw = {"horizon": 1200.0, "drag": dict(REFERENCE_DRAG),
           "nodes": [{"initial_data": 6e8, "v_min": 30 * KMH, "v_max": 100 * KMH}]}
    raw.update(over)
    return raw


def test_validate_reference_scenario():
    cfg = validate_scenario(_raw())
    nd = cfg.node(1)
    assert cfg.knot_count == 200 and cfg.topology == ((1, 0),)
    assert cfg.channel.noise_power == 1e-10 and cfg.channel.bandwidth(0) == 1e5
    assert nd.mass == 3.0 and nd.altitude == 1000.0 and nd.p_max == 100.0
    assert nd.v_init == pytest.approx(65 * KMH)
    assert nd.q_final == -nd.q_init == pytest.approx(600.0 * nd.v_init)


def test_validate_speed_order():
    raw = _raw(nodes=[{"initial_data": 1.0, "v_min": 20.0, "v_max": 10.0}])
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(raw)
    assert any("v_min" in p for p in exc.value.problems)


def test_validate_relay_link_needs_flag():
    raw = _raw(nodes=[{"initial_data": 1.0, "v_min": 10.0, "v_max": 20.0}] * 2,
               topology=[[1, 0], [2, 0], [1, 2]])
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(raw)
    assert any("relaying_enabled" in p for p in exc.value.problems)


def test_validate_collects_every_problem():
    raw = {"horizon": -1.0, "knot_count": 1, "drag": "x",
           "nodes": [{"initial_data": -5.0, "v_min": 20.0, "v_max": 10.0}]}
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(raw)
    assert len(exc.value.problems) >= 4


def test_validate_rejects_sub_bit_load():
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(_raw(nodes=[{"initial_data": 0.5, "v_min": 10.0, "v_max": 20.0}]))
    assert any("1 bit" in p for p in exc.value.problems)
    assert validate_scenario(_raw(nodes=[{"initial_data": 1.0, "v_min": 10.0, "v_max": 20.0}]))


def test_validate_rejects_non_mapping():
    with pytest.raises(ScenarioError):
        validate_scenario([1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(data=st.one_of(st.just(0.0), st.floats(1.0, 8e9)), lo=st.floats(5.0, 20.0),
       span=st.floats(0.0, 15.0), offset=st.floats(-2000.0, 2000.0), knots=st.integers(2, 400))
def test_scenario_round_trip(data, lo, span, offset, knots):
    raw = _raw(knot_count=knots,
               nodes=[{"initial_data": data, "v_min": lo, "v_max": lo + span, "lateral_offset": offset}])
    cfg = validate_scenario(raw)
    assert validate_scenario(scenario_to_dict(cfg)) == cfg
