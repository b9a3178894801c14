"""Direct transcription of the energy-optimal control problem.

States and controls are collocated at ``K + 1`` uniformly spaced knots and
the dynamics are integrated with the trapezoidal rule.  Thrust and
acceleration never appear as decision variables: the force balance is
substituted into the cost, which leaves

    sum_n [ int (p_n + v_n Omega(v_n)) dt + m_n/2 v_n(T)^2 ]

as the objective (the constant ``-m_n/2 v_n(0)^2`` is carried separately
in :attr:`ConvexProgram.objective_offset`).

Decision blocks, each ``K + 1`` long:

* ``p`` and ``r`` per directed link,
* ``s`` (buffer) per node,
* ``q`` and ``v`` per node, unless the node flies at a fixed speed, in
  which case its trajectory is a constant of the program.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .capacity import LN2, enumerate_constraints
from .model import AP, ScenarioConfig, drag_force

RATE_UNIT = 1e6      # bits/s and bits are handled internally in Mbit
POSITION_UNIT = 1e3  # meters -> km


class InfeasibleScenarioError(ValueError):
    """Boundary data that no trajectory can meet (detected before solving)."""


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t, dtype=float)
    if len(t) < 2:
        return w
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


@dataclass
class ConvexProgram:
    """A smooth program ``min f(x)  s.t.  c(x) <= 0,  G x <= h,  A x = b``.

    Everything is in physical units; ``x_scale``, ``f_scale`` and
    ``c_scale`` tell the solver how to nondimensionalise.  ``c`` may be
    absent (``n_nonlinear == 0``).
    """

    n: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], sp.spmatrix]
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    x0: np.ndarray
    cons: Optional[Callable[[np.ndarray], np.ndarray]] = None
    cons_jac: Optional[Callable[[np.ndarray], sp.spmatrix]] = None
    cons_hess: Optional[Callable[[np.ndarray, np.ndarray], sp.spmatrix]] = None
    n_nonlinear: int = 0
    x_scale: Optional[np.ndarray] = None
    f_scale: float = 1.0
    c_scale: Optional[np.ndarray] = None
    objective_offset: float = 0.0
    layout: Optional["VariableLayout"] = None
    knot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cfg: Optional[ScenarioConfig] = None
    kind: str = "energy"
    eq_labels: list = field(default_factory=list)
    ineq_labels: list = field(default_factory=list)

    def __post_init__(self):
        if self.x_scale is None:
            self.x_scale = np.ones(self.n)
        if self.c_scale is None:
            self.c_scale = np.ones(self.n_nonlinear)

    @property
    def n_linear(self) -> int:
        return self.G.shape[0]

    def inequalities(self, x: np.ndarray) -> np.ndarray:
        """All inequality values (nonlinear first, then linear); feasible iff ``<= 0``."""
        lin = self.G @ x - self.h
        if self.n_nonlinear:
            return np.concatenate([self.cons(x), lin])
        return lin

    def inequality_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        if self.n_nonlinear:
            return sp.vstack([self.cons_jac(x), self.G], format="csr")
        return sp.csr_matrix(self.G)

    def inequality_hessian(self, x: np.ndarray, z: np.ndarray) -> sp.spmatrix:
        """``sum_i z_i grad^2 c_i(x)`` (linear rows contribute nothing)."""
        if self.n_nonlinear:
            return self.cons_hess(x, z[:self.n_nonlinear])
        return sp.csr_matrix((self.n, self.n))


@dataclass
class VariableLayout:
    n_knots: int
    blocks: dict          # (quantity, key) -> start offset; key is a link (n, m) or node id
    fixed_q: dict         # node -> constant positions for fixed-speed nodes
    fixed_v: dict
    n: int = 0

    def index(self, quantity: str, key, k=None):
        start = self.blocks.get((quantity, key))
        if start is None:
            return None
        if k is None:
            return np.arange(start, start + self.n_knots)
        return start + k

    def has(self, quantity: str, key) -> bool:
        return (quantity, key) in self.blocks

    def values(self, x: np.ndarray, quantity: str, key) -> np.ndarray:
        idx = self.index(quantity, key)
        if idx is not None:
            return x[idx]
        if quantity == "q":
            return self.fixed_q[key]
        if quantity == "v":
            return self.fixed_v[key]
        raise KeyError((quantity, key))


@dataclass
class Solution:
    knot_times: np.ndarray
    x: np.ndarray
    power: dict = field(default_factory=dict)      # link -> W
    rate: dict = field(default_factory=dict)       # link -> bits/s
    buffer: dict = field(default_factory=dict)     # node -> bits
    position: dict = field(default_factory=dict)   # node -> m
    speed: dict = field(default_factory=dict)      # node -> m/s
    thrust: dict = field(default_factory=dict)     # node -> N
    objective: float = float("nan")
    stats: object = None
    duals: tuple | None = None

    def node_power(self, n: int) -> np.ndarray:
        """Total transmit power of node ``n`` over its outgoing links."""
        links = [l for l in self.power if l[0] == n]
        return sum((self.power[l] for l in links), np.zeros_like(self.knot_times))


@dataclass
class ThrustProfile:
    thrust: dict
    acceleration: dict

    @property
    def min(self) -> float:
        return min(float(f.min()) for f in self.thrust.values())

    @property
    def max(self) -> float:
        return max(float(f.max()) for f in self.thrust.values())


@dataclass
class NodeEnergy:
    transmission: float
    propulsion: float
    drag: float
    kinetic: float
    extra_propulsion: float


@dataclass
class EnergyBreakdown:
    nodes: dict  # node -> NodeEnergy

    @property
    def transmission(self) -> float:
        return sum(e.transmission for e in self.nodes.values())

    @property
    def propulsion(self) -> float:
        return sum(e.propulsion for e in self.nodes.values())

    @property
    def total(self) -> float:
        return self.transmission + self.propulsion

    @property
    def convexified_total(self) -> float:
        """Transmission + drag work + kinetic change: the value the solver minimises."""
        return sum(e.transmission + e.drag + e.kinetic for e in self.nodes.values())

    @property
    def kinetic_identity_gap(self) -> float:
        """``|int vF - (int v Omega + kinetic)|`` summed over nodes."""
        return sum(abs(e.propulsion - e.drag - e.kinetic) for e in self.nodes.values())

    def as_dict(self) -> dict:
        return {
            "total_J": self.total,
            "transmission_J": self.transmission,
            "propulsion_J": self.propulsion,
            "convexified_total_J": self.convexified_total,
            "nodes": {str(n): vars(e).copy() for n, e in self.nodes.items()},
        }


# --------------------------------------------------------------------------
# capacity constraint evaluator


class _CapacityTerms:
    """Vectorised evaluation of every subset constraint at every knot.

    A constraint is a sum over *terms*, one per link in the subset.  Each
    term touches one rate, one power and up to two positions (transmitter
    and, for relay receivers, the receiver).
    """

    def __init__(self, cfg: ScenarioConfig, layout: VariableLayout):
        ch = cfg.channel
        self.alpha = ch.path_loss_exponent
        self.gamma = ch.antenna_gain_product / ch.noise_power
        K1 = layout.n_knots
        beta, con, r_idx, p_idx, qn_idx, qm_idx, qn_c, qm_c, dsq = ([] for _ in range(9))
        labels = []
        i = 0
        for m in cfg.receivers():
            tx = cfg.transmitters_to(m)
            B = ch.bandwidth(m)
            for c in enumerate_constraints(m, tx, B):
                for k in range(K1):
                    beta.append(B / LN2)
                    labels.append(("capacity", m, c.subset, k))
                    for n in c.subset:
                        link = (n, m)
                        nd = cfg.node(n)
                        if m == AP:
                            a, d = nd.altitude, nd.lateral_offset
                        else:
                            rx = cfg.node(m)
                            a, d = nd.altitude - rx.altitude, nd.lateral_offset - rx.lateral_offset
                        con.append(i)
                        r_idx.append(layout.index("r", link, k))
                        p_idx.append(layout.index("p", link, k))
                        dsq.append(a * a + d * d)
                        qi = layout.index("q", n, k)
                        qn_idx.append(-1 if qi is None else qi)
                        qn_c.append(0.0 if qi is not None else layout.fixed_q[n][k])
                        if m == AP:
                            qm_idx.append(-1)
                            qm_c.append(0.0)
                        else:
                            qj = layout.index("q", m, k)
                            qm_idx.append(-1 if qj is None else qj)
                            qm_c.append(0.0 if qj is not None else layout.fixed_q[m][k])
                    i += 1
        self.m = i
        self.labels = labels
        self.beta = np.array(beta)
        self.con = np.array(con, dtype=int)
        self.r_idx = np.array(r_idx, dtype=int)
        self.p_idx = np.array(p_idx, dtype=int)
        self.qn_idx = np.array(qn_idx, dtype=int)
        self.qm_idx = np.array(qm_idx, dtype=int)
        self.qn_c = np.array(qn_c)
        self.qm_c = np.array(qm_c)
        self.dsq = np.array(dsq)
        self.n = layout.n
        # ordered term pairs sharing a constraint (for the rank-one Hessian part)
        order = np.argsort(self.con, kind="stable")
        starts = np.searchsorted(self.con[order], np.arange(self.m + 1))
        pa, pb = [], []
        for j in range(self.m):
            ts = order[starts[j]:starts[j + 1]]
            pa.extend(np.repeat(ts, len(ts)))
            pb.extend(np.tile(ts, len(ts)))
        self.pair_a = np.array(pa, dtype=int)
        self.pair_b = np.array(pb, dtype=int)

    def _terms(self, x):
        qn = np.where(self.qn_idx >= 0, x[np.maximum(self.qn_idx, 0)], self.qn_c)
        qm = np.where(self.qm_idx >= 0, x[np.maximum(self.qm_idx, 0)], self.qm_c)
        delta = qn - qm
        base = self.dsq + delta * delta
        a = self.alpha
        psi = base ** (-a)
        dpsi = -2.0 * a * delta * base ** (-a - 1.0)
        d2psi = -2.0 * a * base ** (-a - 1.0) + 4.0 * a * (a + 1.0) * delta ** 2 * base ** (-a - 2.0)
        p = x[self.p_idx]
        u = np.bincount(self.con, weights=self.gamma * p * psi, minlength=self.m)
        return p, psi, dpsi, d2psi, u

    def values(self, x):
        p, psi, _, _, u = self._terms(x)
        rsum = np.bincount(self.con, weights=x[self.r_idx], minlength=self.m)
        with np.errstate(invalid="ignore"):
            return rsum - self.beta * np.log1p(u)

    def _slots(self, p, psi, dpsi):
        g = self.gamma
        # gradient of u wrt (p, q_tx, q_rx) for each term
        return (
            (self.p_idx, g * psi),
            (self.qn_idx, g * p * dpsi),
            (self.qm_idx, -g * p * dpsi),
        )

    def jacobian(self, x):
        p, psi, dpsi, _, u = self._terms(x)
        coef = -self.beta / (1.0 + u)
        rows = [self.con]
        cols = [self.r_idx]
        vals = [np.ones(len(self.con))]
        for idx, gu in self._slots(p, psi, dpsi):
            mask = idx >= 0
            rows.append(self.con[mask])
            cols.append(idx[mask])
            vals.append((coef[self.con] * gu)[mask])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.m, self.n))

    def hessian(self, x, w):
        """``sum_i w_i grad^2 c_i``."""
        p, psi, dpsi, d2psi, u = self._terms(x)
        g = self.gamma
        outer = (w * self.beta / (1.0 + u) ** 2)
        lin = -(w * self.beta / (1.0 + u))
        slots = self._slots(p, psi, dpsi)
        rows, cols, vals = [], [], []
        ca = self.con[self.pair_a]
        for ia, ga in slots:
            for ib, gb in slots:
                ra = ia[self.pair_a]
                cb = ib[self.pair_b]
                mask = (ra >= 0) & (cb >= 0)
                rows.append(ra[mask])
                cols.append(cb[mask])
                vals.append((outer[ca] * ga[self.pair_a] * gb[self.pair_b])[mask])
        # per-term Hessian of u
        lt = lin[self.con]
        hp_qn = g * dpsi
        hq = g * p * d2psi
        entries = [
            (self.p_idx, self.qn_idx, hp_qn), (self.qn_idx, self.p_idx, hp_qn),
            (self.p_idx, self.qm_idx, -hp_qn), (self.qm_idx, self.p_idx, -hp_qn),
            (self.qn_idx, self.qn_idx, hq), (self.qm_idx, self.qm_idx, hq),
            (self.qn_idx, self.qm_idx, -hq), (self.qm_idx, self.qn_idx, -hq),
        ]
        for ri, ci, v in entries:
            mask = (ri >= 0) & (ci >= 0)
            rows.append(ri[mask])
            cols.append(ci[mask])
            vals.append((lt * v)[mask])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.n, self.n))


# --------------------------------------------------------------------------
# program construction


def _layout(cfg: ScenarioConfig) -> VariableLayout:
    K1 = cfg.knot_count + 1
    t = cfg.knot_times
    blocks = {}
    off = 0
    for link in cfg.topology:
        for qty in ("p", "r"):
            blocks[(qty, link)] = off
            off += K1
    fixed_q, fixed_v = {}, {}
    for n in range(1, cfg.n_nodes + 1):
        nd = cfg.node(n)
        blocks[("s", n)] = off
        off += K1
        if nd.fixed_speed:
            fixed_v[n] = np.full(K1, nd.v_min)
            fixed_q[n] = nd.q_init + nd.direction * nd.v_min * t
        else:
            for qty in ("q", "v"):
                blocks[(qty, n)] = off
                off += K1
    return VariableLayout(n_knots=K1, blocks=blocks, fixed_q=fixed_q, fixed_v=fixed_v, n=off)


def _check_kinematics(cfg: ScenarioConfig) -> None:
    K = cfg.knot_count
    h = cfg.horizon / K
    problems = []
    for n in range(1, cfg.n_nodes + 1):
        nd = cfg.node(n)
        L = nd.path_length
        if nd.fixed_speed:
            covered = nd.v_min * cfg.horizon
            if abs(covered - L) > 1e-9 * max(1.0, L):
                problems.append(f"U{n}: fixed speed {nd.v_min:g} m/s covers {covered:g} m, path needs {L:g} m")
            continue
        lo = h * (nd.v_init / 2 + (K - 0.5) * nd.v_min)
        hi = h * (nd.v_init / 2 + (K - 0.5) * nd.v_max)
        if not (lo <= L <= hi):
            problems.append(
                f"U{n}: path of {L:g} m needs mean speed {L / cfg.horizon:g} m/s, "
                f"reachable distance is [{lo:g}, {hi:g}] m with v in [{nd.v_min:g}, {nd.v_max:g}]")
    if problems:
        raise InfeasibleScenarioError("; ".join(problems))


def build_program(cfg: ScenarioConfig, objective: str = "energy") -> ConvexProgram:
    """Transcribe ``cfg`` onto its knot grid.

    ``objective="energy"`` gives the communication-energy problem;
    ``objective="max_data"`` frees the initial buffer contents and
    maximises the total data offloaded instead (used for feasibility
    margins).  ``objective="fair_data"`` frees them too but maximises
    ``sum_n D_n log s_n(0)``, which splits the deliverable data in
    proportion to the loads; its solutions seed the energy problem.
    """
    if objective not in ("energy", "max_data", "fair_data"):
        raise ValueError(f"unknown objective {objective!r}")
    _check_kinematics(cfg)
    lay = _layout(cfg)
    K1 = lay.n_knots
    K = K1 - 1
    t = cfg.knot_times
    h = cfg.horizon / K
    w = trapezoid_weights(t)
    n = lay.n
    N = cfg.n_nodes
    drag = cfg.drag
    c1, c2 = drag.parasitic_coefficient, drag.induced_coefficient

    # ---- equalities
    A_rows, A_cols, A_vals, b = [], [], [], []
    eq_labels = []

    def eq(entries, rhs, label):
        r = len(b)
        for c, v in entries:
            A_rows.append(r)
            A_cols.append(c)
            A_vals.append(v)
        b.append(rhs)
        eq_labels.append(label)

    for node in range(1, N + 1):
        nd = cfg.node(node)
        s = lay.index("s", node)
        if objective == "energy":
            eq([(s[0], 1.0)], nd.initial_data, ("buffer_init", node))
        eq([(s[K], 1.0)], 0.0, ("buffer_final", node))
        inflow = [lay.index("r", l) for l in cfg.topology if l[1] == node]
        outflow = [lay.index("r", l) for l in cfg.topology if l[0] == node]
        for k in range(K):
            ent = [(s[k + 1], 1.0), (s[k], -1.0)]
            for r in inflow:
                ent += [(r[k], -h / 2), (r[k + 1], -h / 2)]
            for r in outflow:
                ent += [(r[k], h / 2), (r[k + 1], h / 2)]
            eq(ent, 0.0, ("buffer_dynamics", node, k))
        if not nd.fixed_speed:
            q = lay.index("q", node)
            v = lay.index("v", node)
            eq([(q[0], 1.0)], nd.q_init, ("position_init", node))
            eq([(q[K], 1.0)], nd.q_final, ("position_final", node))
            eq([(v[0], 1.0)], nd.v_init, ("speed_init", node))
            for k in range(K):
                eq([(q[k + 1], 1.0), (q[k], -1.0), (v[k], -nd.direction * h / 2),
                    (v[k + 1], -nd.direction * h / 2)], 0.0, ("position_dynamics", node, k))
    A = sp.csr_matrix((A_vals, (A_rows, A_cols)), shape=(len(b), n))
    b = np.array(b, dtype=float)

    # ---- linear inequalities G x <= h
    G_rows, G_cols, G_vals, hv = [], [], [], []
    ineq_labels = []

    def le(entries, rhs, label):
        r = len(hv)
        for c, v in entries:
            G_rows.append(r)
            G_cols.append(c)
            G_vals.append(v)
        hv.append(rhs)
        ineq_labels.append(label)

    inner = range(1, K)
    for node in range(1, N + 1):
        nd = cfg.node(node)
        links = [l for l in cfg.topology if l[0] == node]
        for l in links:
            pi = lay.index("p", l)
            for k in range(K1):
                le([(pi[k], -1.0)], 0.0, ("power_min", l, k))
        for k in range(K1):
            le([(lay.index("p", l, k), 1.0) for l in links], nd.p_max, ("power_max", node, k))
        s = lay.index("s", node)
        first = 1 if objective == "energy" else 0
        for k in range(first, K):
            le([(s[k], 1.0)], nd.buffer_capacity, ("buffer_max", node, k))
        if cfg.relaying_enabled:
            # without relaying the buffer only drains, so r >= 0 already implies s >= 0
            for k in inner:
                le([(s[k], -1.0)], 0.0, ("buffer_min", node, k))
        carries_data = (nd.initial_data > 0.0 or objective != "energy"
                        or any(l[1] == node for l in cfg.topology))
        if carries_data:
            # a node that never holds data has r == 0 forced, which leaves no interior
            for l in links:
                ri = lay.index("r", l)
                for k in range(K1):
                    le([(ri[k], -1.0)], 0.0, ("rate_min", l, k))
        if not nd.fixed_speed:
            v = lay.index("v", node)
            for k in range(1, K1):
                le([(v[k], -1.0)], -nd.v_min, ("speed_min", node, k))
                le([(v[k], 1.0)], nd.v_max, ("speed_max", node, k))
    G = sp.csr_matrix((G_vals, (G_rows, G_cols)), shape=(len(hv), n))
    hv = np.array(hv, dtype=float)

    # ---- capacity constraints
    cap = _CapacityTerms(cfg, lay)

    # ---- objective
    offset = 0.0
    p_all = np.concatenate([lay.index("p", l) for l in cfg.topology])
    p_w = np.tile(w, len(cfg.topology))
    v_idx, v_w, v_mass = [], [], []
    for node in range(1, N + 1):
        nd = cfg.node(node)
        if nd.fixed_speed:
            vv = lay.fixed_v[node]
            offset += float(w @ (vv * drag_force(drag, vv)))
        else:
            v_idx.append(lay.index("v", node))
            v_w.append(w)
            m_end = np.zeros(K1)
            m_end[-1] = nd.mass
            v_mass.append(m_end)
            offset -= 0.5 * nd.mass * nd.v_init ** 2
    v_idx = np.concatenate(v_idx) if v_idx else np.zeros(0, dtype=int)
    v_w = np.concatenate(v_w) if v_w else np.zeros(0)
    v_mass = np.concatenate(v_mass) if v_mass else np.zeros(0)
    s0_idx = np.array([lay.index("s", node, 0) for node in range(1, N + 1)])

    if objective == "energy":
        def f(x):
            v = x[v_idx]
            if np.any(v <= 0.0):
                return np.inf
            return float(p_w @ x[p_all] + v_w @ (c1 * v ** 3 + c2 / v) + 0.5 * v_mass @ v ** 2)

        def grad(x):
            g = np.zeros(n)
            g[p_all] = p_w
            v = x[v_idx]
            g[v_idx] = v_w * (3 * c1 * v ** 2 - c2 / v ** 2) + v_mass * v
            return g

        def hess(x):
            v = x[v_idx]
            d = v_w * (6 * c1 * v + 2 * c2 / v ** 3) + v_mass
            return sp.csr_matrix((d, (v_idx, v_idx)), shape=(n, n))
        f_scale = 1.0 / (h * max(nd.p_max for nd in cfg.nodes))
    elif objective == "max_data":
        offset = 0.0

        def f(x):
            return float(-x[s0_idx].sum())

        def grad(x):
            g = np.zeros(n)
            g[s0_idx] = -1.0
            return g

        def hess(x):
            return sp.csr_matrix((n, n))
        f_scale = 1.0 / RATE_UNIT
    else:
        offset = 0.0
        loads = np.array([nd.initial_data for nd in cfg.nodes])
        if not np.any(loads > 0.0):
            loads = np.ones(N)
        # gradients near the optimum are then of order one
        fair_scale = max(loads.max() / RATE_UNIT, 1.0)
        loads = loads / loads.max()
        keep = loads > 0.0
        s0_idx, loads = s0_idx[keep], loads[keep]

        def f(x):
            s0 = x[s0_idx]
            if np.any(s0 <= 0.0):
                return np.inf
            return float(-loads @ np.log(s0 / RATE_UNIT))

        def grad(x):
            g = np.zeros(n)
            g[s0_idx] = -loads / x[s0_idx]
            return g

        def hess(x):
            return sp.csr_matrix((loads / x[s0_idx] ** 2, (s0_idx, s0_idx)), shape=(n, n))
        f_scale = fair_scale

    # ---- scaling
    xs = np.ones(n)
    # a node that only sends its own small load gets its data in units of that load
    own = {node: RATE_UNIT for node in range(1, N + 1)}
    if objective == "energy" and not cfg.relaying_enabled:
        for node in own:
            d = cfg.node(node).initial_data
            if d > 0.0:
                own[node] = min(RATE_UNIT, d)
    for l in cfg.topology:
        xs[lay.index("p", l)] = cfg.node(l[0]).p_max
        xs[lay.index("r", l)] = own[l[0]]
    for node in range(1, N + 1):
        xs[lay.index("s", node)] = own[node]
        if lay.has("q", node):
            xs[lay.index("q", node)] = POSITION_UNIT
            xs[lay.index("v", node)] = max(cfg.node(node).v_max, 1.0)

    x0 = _initial_point(cfg, lay, objective)
    return ConvexProgram(
        n=n, f=f, grad=grad, hess=hess, A=A, b=b, G=G, h=hv, x0=x0,
        cons=cap.values, cons_jac=cap.jacobian, cons_hess=cap.hessian,
        n_nonlinear=cap.m, x_scale=xs, f_scale=f_scale,
        c_scale=np.full(cap.m, 1.0 / RATE_UNIT), objective_offset=offset,
        layout=lay, knot_times=t, cfg=cfg, kind=objective,
        eq_labels=eq_labels, ineq_labels=cap.labels + ineq_labels)


def _initial_point(cfg: ScenarioConfig, lay: VariableLayout, objective: str) -> np.ndarray:
    """Point satisfying every equality; strictly feasible when the data load is easy.

    Speeds are held at the constant that covers the path, powers at half
    of ``p_max`` split evenly over outgoing links, and rates at a fraction
    of what each link achieves when every other transmitter into the same
    receiver is treated as noise (such rate tuples always lie inside the
    region).  The solver runs a phase-one search when this is not
    strictly feasible.
    """
    K1 = lay.n_knots
    K = K1 - 1
    t = cfg.knot_times
    h = cfg.horizon / K
    x = np.zeros(lay.n)
    ch = cfg.channel
    for node in range(1, cfg.n_nodes + 1):
        nd = cfg.node(node)
        if lay.has("v", node):
            vbar = (nd.path_length / h - nd.v_init / 2) / (K - 0.5)
            v = np.full(K1, vbar)
            v[0] = nd.v_init
            q = nd.q_init + nd.direction * np.concatenate([[0.0], np.cumsum(h / 2 * (v[:-1] + v[1:]))])
            q[-1] = nd.q_final
            x[lay.index("v", node)] = v
            x[lay.index("q", node)] = q
    for l in cfg.topology:
        n_out = len(cfg.outgoing(l[0]))
        x[lay.index("p", l)] = 0.5 * cfg.node(l[0]).p_max / n_out

    def position(node):
        return lay.values(x, "q", node)

    # noise-treated capacity per link
    cap_nt = {}
    for m in cfg.receivers():
        tx = cfg.transmitters_to(m)
        rx_q = np.zeros(K1) if m == AP else position(m)
        rx = None if m == AP else cfg.node(m)
        recv = {}
        for n in tx:
            nd = cfg.node(n)
            a = nd.altitude - (rx.altitude if rx else 0.0)
            d = nd.lateral_offset - (rx.lateral_offset if rx else 0.0)
            g = ch.antenna_gain_product / (a * a + d * d + (position(n) - rx_q) ** 2) ** ch.path_loss_exponent
            recv[n] = g * x[lay.index("p", (n, m))]
        total = sum(recv.values())
        for n in tx:
            sinr = recv[n] / (ch.noise_power + total - recv[n])
            cap_nt[(n, m)] = ch.bandwidth(m) * np.log1p(sinr) / LN2

    w = trapezoid_weights(t)
    relay_frac = 1e-3
    for l in cfg.topology:
        if l[1] != AP:
            x[lay.index("r", l)] = relay_frac * cap_nt[l]
    for node in range(1, cfg.n_nodes + 1):
        nd = cfg.node(node)
        into = sum((w @ x[lay.index("r", l)] for l in cfg.topology if l[1] == node), 0.0)
        relayed_out = sum((w @ x[lay.index("r", l)] for l in cfg.topology if l[0] == node and l[1] != AP), 0.0)
        if (node, AP) in cfg.topology:
            c = cap_nt[(node, AP)]
            if objective == "energy":
                need = nd.initial_data + into - relayed_out
                rho = need / (w @ c) if w @ c > 0 else 0.0
            else:
                rho = 0.5
            x[lay.index("r", (node, AP))] = rho * c
    for node in range(1, cfg.n_nodes + 1):
        nd = cfg.node(node)
        net = np.zeros(K1)
        for l in cfg.topology:
            if l[1] == node:
                net += x[lay.index("r", l)]
            if l[0] == node:
                net -= x[lay.index("r", l)]
        drained = np.concatenate([[0.0], np.cumsum(h / 2 * (net[:-1] + net[1:]))])
        start = nd.initial_data if objective == "energy" else -drained[-1]
        s = start + drained
        x[lay.index("s", node)] = s
    return x


def unpack(program: ConvexProgram, x: np.ndarray, stats=None, duals=None) -> Solution:
    """Split a decision vector into per-link and per-node trajectories."""
    lay = program.layout
    obj = program.f(x) + program.objective_offset
    if lay is None:
        return Solution(knot_times=program.knot_times, x=x.copy(), objective=obj, stats=stats, duals=duals)
    cfg = program.cfg
    sol = Solution(knot_times=program.knot_times.copy(), x=x.copy(), objective=obj,
                   stats=stats, duals=duals)
    for l in cfg.topology:
        sol.power[l] = x[lay.index("p", l)].copy()
        sol.rate[l] = x[lay.index("r", l)].copy()
    for node in range(1, cfg.n_nodes + 1):
        sol.buffer[node] = x[lay.index("s", node)].copy()
        sol.position[node] = np.array(lay.values(x, "q", node), dtype=float)
        sol.speed[node] = np.array(lay.values(x, "v", node), dtype=float)
    if program.kind == "energy":
        sol.thrust = recover_thrust(cfg, sol).thrust
    return sol


# --------------------------------------------------------------------------
# post-solve accounting


def recover_thrust(cfg: ScenarioConfig, solution: Solution) -> ThrustProfile:
    """Thrust from the force balance ``F = Omega(v) + m dv/dt``.

    Acceleration uses second-order central differences, one-sided at the
    ends.  Thrust bounds are not part of the program; inspect
    ``ThrustProfile.min``/``max`` against them.
    """
    t = solution.knot_times
    thrust, acc = {}, {}
    for node, v in solution.speed.items():
        a = np.gradient(v, t, edge_order=2) if len(t) > 2 else np.gradient(v, t)
        thrust[node] = drag_force(cfg.drag, v) + cfg.node(node).mass * a
        acc[node] = a
    return ThrustProfile(thrust=thrust, acceleration=acc)


def constant_speed_propulsion(cfg: ScenarioConfig, node: int) -> float:
    """Energy to cover node's path at constant speed over the horizon."""
    nd = cfg.node(node)
    v = nd.path_length / cfg.horizon
    if v == 0.0:
        return 0.0
    return float(v * drag_force(cfg.drag, v) * cfg.horizon)


def evaluate_energy(cfg: ScenarioConfig, solution: Solution) -> EnergyBreakdown:
    t = solution.knot_times
    w = trapezoid_weights(t)
    thrust = solution.thrust or recover_thrust(cfg, solution).thrust
    out = {}
    for node in range(1, cfg.n_nodes + 1):
        nd = cfg.node(node)
        v = solution.speed[node]
        prop = float(w @ (v * thrust[node]))
        dragw = float(w @ (v * drag_force(cfg.drag, v)))
        kin = 0.5 * nd.mass * (v[-1] ** 2 - v[0] ** 2)
        out[node] = NodeEnergy(
            transmission=float(w @ solution.node_power(node)),
            propulsion=prop, drag=dragw, kinetic=kin,
            extra_propulsion=prop - constant_speed_propulsion(cfg, node))
    return EnergyBreakdown(out)


@dataclass
class FeasibilityReport:
    violations: list  # (label, scaled magnitude, physical magnitude)
    tol: float

    @property
    def max_violation(self) -> float:
        return max((v[1] for v in self.violations), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def worst(self, count: int = 5) -> list:
        return sorted(self.violations, key=lambda v: -v[1])[:count]


def check_feasibility(cfg: ScenarioConfig, solution: Solution, tol: float = 1e-6) -> FeasibilityReport:
    """List every violated constraint of the continuous problem at the knots.

    Magnitudes are reported in the solver's working units (Mbit, Mbit/s,
    km, fraction of ``p_max`` or ``v_max``) and, alongside, in SI.
    """
    viol = []

    def add(label, mag, unit):
        if mag > 0.0:
            viol.append((label, mag / unit, mag))

    t = solution.knot_times
    h = np.diff(t)
    ch = cfg.channel
    for m in cfg.receivers():
        tx = cfg.transmitters_to(m)
        for c in enumerate_constraints(m, tx, ch.bandwidth(m)):
            rsum = sum(solution.rate[(n, m)] for n in c.subset)
            snr = 0.0
            for n in c.subset:
                nd = cfg.node(n)
                if m == AP:
                    a, d, dq = nd.altitude, nd.lateral_offset, solution.position[n]
                else:
                    rx = cfg.node(m)
                    a, d = nd.altitude - rx.altitude, nd.lateral_offset - rx.lateral_offset
                    dq = solution.position[n] - solution.position[m]
                g = ch.antenna_gain_product / (a * a + d * d + dq ** 2) ** ch.path_loss_exponent
                snr = snr + g * np.maximum(solution.power[(n, m)], 0.0) / ch.noise_power
            res = rsum - ch.bandwidth(m) * np.log1p(snr) / LN2
            for k in np.nonzero(res > 0)[0]:
                add(("capacity", m, c.subset, int(k)), float(res[k]), RATE_UNIT)
    for node in range(1, cfg.n_nodes + 1):
        nd = cfg.node(node)
        s = solution.buffer[node]
        net = np.zeros_like(t)
        for l in cfg.topology:
            if l[1] == node:
                net += solution.rate[l]
            if l[0] == node:
                net -= solution.rate[l]
        dyn = np.abs(np.diff(s) - h / 2 * (net[:-1] + net[1:]))
        for k in np.nonzero(dyn > 0)[0]:
            add(("buffer_dynamics", node, int(k)), float(dyn[k]), RATE_UNIT)
        add(("buffer_init", node), abs(s[0] - nd.initial_data), RATE_UNIT)
        add(("buffer_final", node), abs(s[-1]), RATE_UNIT)
        for k in np.nonzero(s < 0)[0]:
            add(("buffer_min", node, int(k)), float(-s[k]), RATE_UNIT)
        for k in np.nonzero(s > nd.buffer_capacity)[0]:
            add(("buffer_max", node, int(k)), float(s[k] - nd.buffer_capacity), RATE_UNIT)
        ptot = solution.node_power(node)
        for l in cfg.topology:
            if l[0] == node:
                for k in np.nonzero(solution.power[l] < 0)[0]:
                    add(("power_min", l, int(k)), float(-solution.power[l][k]), nd.p_max)
                for k in np.nonzero(solution.rate[l] < 0)[0]:
                    add(("rate_min", l, int(k)), float(-solution.rate[l][k]), RATE_UNIT)
        for k in np.nonzero(ptot > nd.p_max)[0]:
            add(("power_max", node, int(k)), float(ptot[k] - nd.p_max), nd.p_max)
        q, v = solution.position[node], solution.speed[node]
        vs = max(nd.v_max, 1.0)
        add(("position_init", node), abs(q[0] - nd.q_init), POSITION_UNIT)
        add(("position_final", node), abs(q[-1] - nd.q_final), POSITION_UNIT)
        add(("speed_init", node), abs(v[0] - nd.v_init), vs)
        pdyn = np.abs(np.diff(q) - nd.direction * h / 2 * (v[:-1] + v[1:]))
        for k in np.nonzero(pdyn > 0)[0]:
            add(("position_dynamics", node, int(k)), float(pdyn[k]), POSITION_UNIT)
        for k in np.nonzero(v < nd.v_min)[0]:
            add(("speed_min", node, int(k)), float(nd.v_min - v[k]), vs)
        for k in np.nonzero(v > nd.v_max)[0]:
            add(("speed_max", node, int(k)), float(v[k] - nd.v_max), vs)
    return FeasibilityReport(viol, tol)


def delivered_bits(cfg: ScenarioConfig, solution: Solution) -> float:
    """Trapezoidal integral of every rate arriving at the access point."""
    w = trapezoid_weights(solution.knot_times)
    return float(sum(w @ solution.rate[l] for l in cfg.topology if l[1] == AP))
