"""Scenario builders shared by the unit tests."""
from __future__ import annotations

from commenergy.model import KMH, MEGABYTE_BITS, validate_scenario

REFERENCE_DRAG = {"parasitic_coefficient": 9.26e-4, "induced_coefficient": 2250.0}
CALIBRATED_G = 1.0017282769527989


def single_node(data_mb=10.0, fixed=True, knots=50, gain=CALIBRATED_G, **node):
    v = 65 * KMH
    raw_node = {"initial_data": data_mb * MEGABYTE_BITS,
                "v_min": v if fixed else 30 * KMH, "v_max": v if fixed else 100 * KMH,
                "v_init": v}
    raw_node.update(node)
    return validate_scenario({"horizon": 1200.0, "knot_count": knots,
                              "channel": {"antenna_gain_product": gain},
                              "drag": REFERENCE_DRAG, "nodes": [raw_node]})


def two_nodes(data_mb=(5.0, 5.0), offsets=(0.0, 1000.0), knots=40, gain=CALIBRATED_G):
    v = 65 * KMH
    nodes = [{"initial_data": d * MEGABYTE_BITS, "v_min": v, "v_max": v, "v_init": v,
              "lateral_offset": off} for d, off in zip(data_mb, offsets)]
    return validate_scenario({"horizon": 1200.0, "knot_count": knots,
                              "channel": {"antenna_gain_product": gain},
                              "drag": REFERENCE_DRAG, "nodes": nodes})


def relay_pair(knots=30, fixed=True):
    v = 65 * KMH
    node = {"v_min": v if fixed else 30 * KMH, "v_max": v if fixed else 100 * KMH, "v_init": v}
    return validate_scenario({
        "horizon": 1200.0, "knot_count": knots, "relaying_enabled": True,
        "topology": [[1, 0], [2, 0], [2, 1]],
        "channel": {"antenna_gain_product": CALIBRATED_G, "bandwidth_per_receiver": [1e5, 1e5, 1e5]},
        "drag": REFERENCE_DRAG,
        "nodes": [{**node, "initial_data": 10 * MEGABYTE_BITS, "altitude": 1000.0},
                  {**node, "initial_data": 10 * MEGABYTE_BITS, "altitude": 1200.0,
                   "lateral_offset": 3000.0}]})
