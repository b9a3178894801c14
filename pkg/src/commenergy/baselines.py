"""Reference solutions that do not go through the interior-point code.

Water-filling
-------------
For a fixed trajectory the only decisions are the powers.  Minimising
``sum_k w_k p_k`` subject to ``sum_k w_k B log2(1 + g_k p_k / sigma^2) = D``
and ``0 <= p_k <= P_max`` gives the stationarity condition

    w_k = lam * w_k * B * g_k / (ln 2 * (sigma^2 + g_k p_k))

for every knot with ``0 < p_k < P_max``.  The quadrature weights cancel,
leaving ``p_k + sigma^2 / g_k = lam * B / ln 2 =: nu``, so

    p_k = clip(nu - sigma^2 / g_k, 0, P_max)

with a single water level ``nu`` chosen so that the delivered data equals
``D``.  Delivered data is non-decreasing in ``nu``; it is found by bisection.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .capacity import LN2
from .model import AP, ScenarioConfig, drag_force, gain_profile
from .transcription import (InfeasibleScenarioError, Solution, build_program,
                            trapezoid_weights)

BISECTION_STEPS = 200


@dataclass(frozen=True)
class LinkProfile:
    knot_times: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knot_times, float)
        g = np.asarray(self.gains, float)
        if t.ndim != 1 or g.shape != t.shape:
            raise ValueError("knot_times and gains must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("knot times must be strictly increasing")
        if np.any(g <= 0.0) or not np.all(np.isfinite(g)):
            raise ValueError("gains must be positive and finite")
        object.__setattr__(self, "knot_times", t)
        object.__setattr__(self, "gains", g)


@dataclass
class WaterFilling:
    power: np.ndarray
    water_level: float
    delivered: float

    def energy(self, profile: LinkProfile) -> float:
        return float(trapezoid_weights(profile.knot_times) @ self.power)


class DataTooLargeError(InfeasibleScenarioError):
    def __init__(self, message: str, max_data: float):
        super().__init__(message)
        self.max_data = max_data


def _delivered(nu, floor, w, p_max, bandwidth):
    """Data delivered at water level(s) ``nu``; ``floor`` is ``sigma^2 / g``.

    Broadcasts a trailing knot axis so a batch of profiles can be filled at once.
    """
    p = np.clip(nu[..., None] - floor, 0.0, p_max)
    return bandwidth * (np.log1p(p / floor) @ w) / LN2, p


def _water_levels(floor: np.ndarray, w: np.ndarray, data: float, p_max: float, bandwidth: float):
    """Vectorised bisection for the water level of each row of ``floor``.

    Rows that cannot deliver ``data`` get ``nan``.
    """
    floor = np.atleast_2d(floor)
    lo = floor.min(axis=1)
    hi = floor.max(axis=1) + p_max
    cap, _ = _delivered(hi, floor, w, p_max, bandwidth)
    ok = cap >= data
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        got, _ = _delivered(mid, floor, w, p_max, bandwidth)
        below = got < data
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
            break
    return np.where(ok, hi, np.nan), cap


def water_filling(profile: LinkProfile, data: float, p_max: float, noise_power: float,
                  bandwidth: float) -> WaterFilling:
    """Minimum-energy power profile delivering ``data`` bits over ``profile``.

    Raises
    ------
    DataTooLargeError
        If ``data`` exceeds what ``p = p_max`` at every knot delivers.
    """
    if data < 0:
        raise ValueError("data must be non-negative")
    floor = noise_power / profile.gains
    w = trapezoid_weights(profile.knot_times)
    if data == 0.0:
        return WaterFilling(np.zeros_like(floor), float(floor.min()), 0.0)
    nu, cap = _water_levels(floor, w, data, p_max, bandwidth)
    if not np.isfinite(nu[0]):
        raise DataTooLargeError(
            f"{data:.6g} bits requested but at most {cap[0]:.6g} are deliverable", float(cap[0]))
    got, p = _delivered(nu, floor[None, :], w, p_max, bandwidth)
    return WaterFilling(p[0], float(nu[0]), float(got[0]))


def max_feasible_data(profile: LinkProfile, p_max: float, noise_power: float, bandwidth: float) -> float:
    """Bits delivered over ``profile`` transmitting at full power throughout."""
    if len(profile.knot_times) < 2:
        return 0.0
    w = trapezoid_weights(profile.knot_times)
    return float(bandwidth * (np.log1p(profile.gains * p_max / noise_power) @ w) / LN2)


def constant_speed_positions(cfg: ScenarioConfig, node: int) -> np.ndarray:
    """Positions on the knot grid when ``node`` covers its path at constant speed."""
    nd = cfg.node(node)
    t = cfg.knot_times
    return nd.q_init + (nd.q_final - nd.q_init) * (t - t[0]) / (t[-1] - t[0])


def link_profile(cfg: ScenarioConfig, node: int, positions: np.ndarray | None = None) -> LinkProfile:
    """Gain profile of ``node``'s uplink to the access point.

    Uses the constant-speed trajectory unless ``positions`` are given.
    """
    nd = cfg.node(node)
    q = constant_speed_positions(cfg, node) if positions is None else np.asarray(positions, float)
    return LinkProfile(cfg.knot_times, gain_profile(cfg.channel, nd.altitude, nd.lateral_offset, q))


def calibrate_gain(cfg: ScenarioConfig, target_bits: float, node: int = 1,
                   rtol: float = 1e-12) -> float:
    """Antenna-gain product ``G`` at which the constant-speed maximum equals ``target_bits``.

    Only ``node``'s own uplink is considered.  Deliverable data grows
    strictly with ``G``, so the root is unique; it is bracketed by doubling
    and then bisected (in ``log G``).
    """
    if not target_bits > 0.0:
        raise ValueError("calibration target must be positive")
    nd = cfg.node(node)
    unit = replace(cfg, channel=replace(cfg.channel, antenna_gain_product=1.0))
    base = link_profile(unit, node)
    bw = cfg.channel.bandwidth(AP)

    def data(G):
        return max_feasible_data(LinkProfile(base.knot_times, G * base.gains), nd.p_max,
                                 cfg.channel.noise_power, bw)

    lo, hi = 1.0, 1.0
    for _ in range(400):
        if data(lo) <= target_bits:
            break
        lo *= 0.5
    for _ in range(400):
        if data(hi) >= target_bits:
            break
        hi *= 2.0
    if not (data(lo) <= target_bits <= data(hi)):
        raise ValueError(f"target {target_bits:.6g} bits cannot be bracketed")
    for _ in range(BISECTION_STEPS):
        mid = math.sqrt(lo * hi)
        if data(mid) < target_bits:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 <= rtol:
            break
    return math.sqrt(lo * hi)


def fixed_speed_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Copy of ``cfg`` in which every node covers its path at constant speed."""
    nodes = []
    for nd in cfg.nodes:
        v = nd.path_length / cfg.horizon
        nodes.append(replace(nd, v_min=v, v_max=v, v_init=v))
    return replace(cfg, nodes=tuple(nodes))


def fixed_speed_solution(cfg: ScenarioConfig, opts=None) -> Solution:
    """Optimal powers and rates along fixed constant-speed trajectories.

    The transcription drops positions and speeds of fixed-speed nodes, so
    this is the transmission-only program solved by the main solver.
    Solver statistics are attached to ``Solution.stats``.
    """
    from .solver import solve

    if not all(nd.fixed_speed for nd in cfg.nodes):
        raise ValueError("fixed_speed_solution needs v_min == v_max for every node")
    sol, _ = solve(build_program(cfg), opts)
    return sol


@dataclass
class OracleResult:
    energy: float
    speeds: np.ndarray
    power: np.ndarray
    transmission: float
    propulsion: float
    n_profiles: int
    n_feasible: int


def brute_force_oracle(cfg: ScenarioConfig, speed_grid: int = 20) -> OracleResult:
    """Grid search over speed profiles with water-filled powers.

    Speeds at knots ``1 .. K-1`` range over ``speed_grid`` evenly spaced
    values in ``[v_min, v_max]``; the final speed then follows from the
    path length and is kept only if it is within bounds.  Each surviving
    trajectory gets its exact minimum-energy powers from
    :func:`water_filling`, so only speeds are gridded.  The energy is the
    same quantity the transcription minimises: trapezoidal transmission and
    drag energy plus the change in kinetic energy.
    """
    if cfg.n_nodes != 1:
        raise ValueError("the oracle handles a single node only")
    K = cfg.knot_count
    if K > 4:
        raise ValueError("the oracle is limited to K <= 4")
    if not 1 <= speed_grid <= 50:
        raise ValueError("speed_grid must be between 1 and 50")
    nd = cfg.node(1)
    t = cfg.knot_times
    h = cfg.horizon / K
    w = trapezoid_weights(t)
    levels = np.linspace(nd.v_min, nd.v_max, speed_grid) if speed_grid > 1 else np.array([nd.v_min])
    if nd.fixed_speed:
        levels = np.array([nd.v_min])

    inner = np.array(list(itertools.product(levels, repeat=K - 1))).reshape(-1, K - 1)
    # L = h/2 (v_0 + 2 v_1 + ... + 2 v_{K-1} + v_K)
    v_last = 2.0 * nd.path_length / h - nd.v_init - 2.0 * inner.sum(axis=1)
    slack = 1e-9 * max(nd.v_max, 1.0)
    keep = (v_last >= nd.v_min - slack) & (v_last <= nd.v_max + slack)
    n_profiles = len(inner)
    v = np.column_stack([np.full(n_profiles, nd.v_init), inner, np.clip(v_last, nd.v_min, nd.v_max)])[keep]
    if len(v) == 0:
        raise ValueError("no speed profile on the grid meets the distance constraint")
    if np.any(v <= 0.0):
        v = v[np.all(v > 0.0, axis=1)]
    q = nd.q_init + nd.direction * np.column_stack(
        [np.zeros(len(v)), np.cumsum(h / 2 * (v[:, :-1] + v[:, 1:]), axis=1)])
    propulsion = (v * drag_force(cfg.drag, v)) @ w + 0.5 * nd.mass * (v[:, -1] ** 2 - nd.v_init ** 2)

    floor = cfg.channel.noise_power / gain_profile(cfg.channel, nd.altitude, nd.lateral_offset, q)
    bw = cfg.channel.bandwidth(AP)
    if nd.initial_data > 0.0:
        nu, _ = _water_levels(floor, w, nd.initial_data, nd.p_max, bw)
        _, p = _delivered(np.nan_to_num(nu, nan=0.0), floor, w, nd.p_max, bw)
        transmission = np.where(np.isfinite(nu), p @ w, np.inf)
    else:
        p = np.zeros_like(v)
        transmission = np.zeros(len(v))
    total = transmission + propulsion
    feasible = int(np.isfinite(total).sum())
    if feasible == 0:
        raise InfeasibleScenarioError("no speed profile on the grid can deliver the load")
    # argmin returns the first minimiser, so ties resolve in enumeration order
    i = int(np.argmin(total))
    return OracleResult(energy=float(total[i]), speeds=v[i].copy(), power=p[i].copy(),
                        transmission=float(transmission[i]), propulsion=float(propulsion[i]),
                        n_profiles=n_profiles, n_feasible=feasible)
