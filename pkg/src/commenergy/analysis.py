"""Post-solve interpretation: decoding priorities, policy comparison, energy baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import fixed_speed_config
from .capacity import OffBoundaryError, decoding_priority, two_user_corners
from .model import AP, ScenarioConfig, gain_profile
from .transcription import (Solution, build_program, constant_speed_propulsion,
                            evaluate_energy)

DEFAULT_THRESHOLD = 1e-4  # fraction of p_max below which a transmitter counts as silent


@dataclass
class PriorityTrace:
    """Decoding priority of the first transmitter at each knot.

    ``priority`` is 1 where the first transmitter is decoded last (it sees
    no interference) and 0 for the opposite order; it is ``nan`` where a
    transmitter is silent.  ``distance`` holds each active rate pair's
    distance from the sum-rate segment, relative to the sum capacity, and
    ``off_boundary`` flags pairs further away than the tolerance.
    """
    knot_times: np.ndarray
    transmitters: tuple[int, int]
    priority: np.ndarray
    active: np.ndarray
    distance: np.ndarray
    off_boundary: np.ndarray
    tolerance: float

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def summary(self) -> dict:
        ok = self.active & ~self.off_boundary
        vals = self.priority[ok]
        return {
            "transmitters": list(self.transmitters),
            "active_knots": self.n_active,
            "off_boundary_knots": int(self.off_boundary.sum()),
            "priority_min": float(vals.min()) if vals.size else None,
            "priority_max": float(vals.max()) if vals.size else None,
            "max_relative_distance": float(np.nanmax(self.distance)) if self.n_active else None,
        }


def priority_trace(solution: Solution, cfg: ScenarioConfig, power_threshold: float | None = None,
                   receiver: int = AP, tolerance: float = 1e-4) -> PriorityTrace:
    """Reconstruct the SIC priority from solved powers, positions and rates.

    Needs exactly two transmitters into ``receiver``.  ``power_threshold``
    defaults to ``1e-4`` times the smaller ``p_max`` of the two.
    """
    tx = cfg.transmitters_to(receiver)
    if len(tx) != 2:
        raise ValueError(f"priority is defined for two transmitters, receiver {receiver} has {len(tx)}")
    n1, n2 = tx
    if power_threshold is None:
        power_threshold = DEFAULT_THRESHOLD * min(cfg.node(n1).p_max, cfg.node(n2).p_max)
    ch = cfg.channel
    bw = ch.bandwidth(receiver)
    K1 = len(solution.knot_times)
    rx_q = np.zeros(K1) if receiver == AP else solution.position[receiver]
    rx = None if receiver == AP else cfg.node(receiver)

    def gains(n):
        nd = cfg.node(n)
        a = nd.altitude - (rx.altitude if rx else 0.0)
        d = nd.lateral_offset - (rx.lateral_offset if rx else 0.0)
        return gain_profile(ch, a, d, solution.position[n] - rx_q)

    g1, g2 = gains(n1), gains(n2)
    p1, p2 = solution.power[(n1, receiver)], solution.power[(n2, receiver)]
    r1, r2 = solution.rate[(n1, receiver)], solution.rate[(n2, receiver)]
    active = (p1 > power_threshold) & (p2 > power_threshold)
    prio = np.full(K1, np.nan)
    dist = np.full(K1, np.nan)
    off = np.zeros(K1, dtype=bool)
    for k in np.flatnonzero(active):
        c1, c2 = two_user_corners(g1[k], g2[k], p1[k], p2[k], ch.noise_power, bw)
        try:
            prio[k] = decoding_priority(c1, c2, (r1[k], r2[k]), rtol=tolerance)
        except OffBoundaryError:
            off[k] = True
        # record the distance either way; flagged knots keep nan priority
        seg = np.subtract(c1.rates, c2.rates)
        pt = np.subtract((r1[k], r2[k]), c2.rates)
        w = float(np.clip(pt @ seg / (seg @ seg), 0.0, 1.0)) if seg @ seg > 0 else 1.0
        dist[k] = float(np.linalg.norm(pt - w * seg)) / max(sum(c1.rates), 1e-300)
    return PriorityTrace(solution.knot_times.copy(), (n1, n2), prio, active, dist, off, tolerance)


def energy_vs_baseline(solution: Solution, cfg: ScenarioConfig) -> float:
    """Propulsion energy beyond covering every path at constant speed (J, summed over nodes)."""
    e = evaluate_energy(cfg, solution)
    return float(sum(ne.propulsion - constant_speed_propulsion(cfg, n) for n, ne in e.nodes.items()))


@dataclass
class PolicyComparison:
    joint_status: str
    fixed_status: str
    joint_energy: float
    fixed_energy: float
    joint_max_data: float
    fixed_max_data: float
    joint_breakdown: dict = field(default_factory=dict)
    fixed_breakdown: dict = field(default_factory=dict)

    @property
    def uplift(self) -> float:
        """Ratio of deliverable data with speed control to that at constant speed."""
        if self.fixed_max_data <= 0.0:
            return math.inf if self.joint_max_data > 0.0 else math.nan
        return self.joint_max_data / self.fixed_max_data

    def as_dict(self) -> dict:
        return {
            "joint": {"status": self.joint_status, "energy_J": self.joint_energy,
                      "max_data_bits": self.joint_max_data, "breakdown": self.joint_breakdown},
            "fixed_speed": {"status": self.fixed_status, "energy_J": self.fixed_energy,
                            "max_data_bits": self.fixed_max_data, "breakdown": self.fixed_breakdown},
            "uplift": self.uplift,
        }


def _max_data(cfg: ScenarioConfig, opts) -> float:
    from .solver import solve_program

    prog = build_program(cfg, "max_data")
    x, _, st = solve_program(prog, opts)
    if st.status != "optimal":
        return math.nan
    return float(sum(x[prog.layout.index("s", n, 0)] for n in range(1, cfg.n_nodes + 1)))


def _energy(cfg: ScenarioConfig, opts):
    from .solver import solve

    sol, st = solve(build_program(cfg), opts)
    if st.status != "optimal":
        return st.status, math.nan, {}
    return st.status, float(sol.objective), evaluate_energy(cfg, sol).as_dict()


def compare_policies(cfg: ScenarioConfig, opts=None) -> PolicyComparison:
    """Joint speed and power optimisation against constant speed with optimal power.

    Energies are the minimised objectives of each program; maximum data
    comes from the data-maximising variant of each.  When every node
    already flies at fixed speed the two policies coincide and are solved
    once.
    """
    fixed = fixed_speed_config(cfg)
    j_status, j_energy, j_break = _energy(cfg, opts)
    j_max = _max_data(cfg, opts)
    if all(nd.fixed_speed for nd in cfg.nodes):
        f_status, f_energy, f_break, f_max = j_status, j_energy, j_break, j_max
    else:
        f_status, f_energy, f_break = _energy(fixed, opts)
        f_max = _max_data(fixed, opts)
    return PolicyComparison(j_status, f_status, j_energy, f_energy, j_max, f_max, j_break, f_break)
