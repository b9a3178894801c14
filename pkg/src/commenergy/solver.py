"""Primal-dual interior-point solver for transcribed programs.

A monotone (Fiacco-McCormick) barrier method: for a fixed barrier weight
``mu`` Newton steps on the primal-dual system are taken with a backtracking
line search on the barrier function, then ``mu`` is reduced.  Iterates
stay strictly inside the inequalities, and equality constraints (all
linear) hold from the start, so the barrier function itself is the merit
function.

The capacity constraints are not jointly convex in powers and positions,
so the reduced Hessian can be indefinite away from the optimum.  Each
Newton direction therefore passes a curvature test; when it fails, a
multiple of the identity is added to the Hessian block and the system is
refactorised (an inertia-free alternative to inertia correction).

When the initial point is not strictly feasible a phase-one problem
``min t  s.t.  g(x) <= t`` is solved first.  A phase-one optimum with
``t >= 0`` certifies (local) infeasibility.  For transcribed energy
problems :func:`solve` first tries a cheaper and far more reliable route:
solve the data-maximising variant of the scenario (which always has a
strictly feasible start) and scale its rates down to the required loads.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .transcription import ConvexProgram, Solution, unpack

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    kkt_tolerance: float = 1e-8
    max_iterations: int = 200
    initial_barrier_weight: float = 0.1
    barrier_decrease: float = 0.2
    barrier_superlinear: float = 1.5
    barrier_error_factor: float = 10.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    feasibility_restoration: bool = True
    phase_one_margin: float = 1e-3
    record_history: bool = False

    def __post_init__(self):
        if not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class KKTResiduals:
    stationarity: float
    primal: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


@dataclass
class SolveStats:
    status: str                     # optimal | max_iter | infeasible | numerical
    iterations: int
    residuals: KKTResiduals
    objective: float
    phase_one_iterations: int = 0
    message: str = ""
    barrier_weight: float = float("nan")
    merit_history: list = field(default_factory=list)   # (mu, before, after) per accepted step
    iterates: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "phase_one_iterations": self.phase_one_iterations,
            "objective": self.objective,
            "kkt_stationarity": self.residuals.stationarity,
            "kkt_primal": self.residuals.primal,
            "kkt_complementarity": self.residuals.complementarity,
            "message": self.message,
        }


class _Scaled:
    """Nondimensionalised view of a :class:`ConvexProgram`.

    ``x = D xt`` with ``D = diag(x_scale)``; the objective is multiplied by
    ``f_scale``; nonlinear rows by ``c_scale``; linear rows are equilibrated
    to unit infinity-norm.
    """

    def __init__(self, prog: ConvexProgram):
        self.prog = prog
        self.D = np.asarray(prog.x_scale, float)
        self.Dm = sp.diags(self.D)
        self.fs = prog.f_scale
        self.m_nl = prog.n_nonlinear
        Gd = sp.csr_matrix(prog.G @ self.Dm)
        rg = _row_inf_norm(Gd)
        rg[rg == 0] = 1.0
        self.G = sp.csr_matrix(sp.diags(1.0 / rg) @ Gd)
        self.h = prog.h / rg
        Ad = sp.csr_matrix(prog.A @ self.Dm)
        ra = _row_inf_norm(Ad)
        ra[ra == 0] = 1.0
        self.A = sp.csr_matrix(sp.diags(1.0 / ra) @ Ad)
        self.b = prog.b / ra
        self.cs = np.asarray(prog.c_scale, float)
        self.n = prog.n
        self.m = self.m_nl + self.G.shape[0]

    def to_phys(self, xt):
        return self.D * xt

    def from_phys(self, x):
        return x / self.D

    def f(self, xt):
        return self.fs * self.prog.f(self.D * xt)

    def grad(self, xt):
        return self.fs * self.D * self.prog.grad(self.D * xt)

    def g(self, xt):
        lin = self.G @ xt - self.h
        if self.m_nl:
            return np.concatenate([self.cs * self.prog.cons(self.D * xt), lin])
        return lin

    def jac(self, xt):
        if self.m_nl:
            Jc = sp.diags(self.cs) @ self.prog.cons_jac(self.D * xt) @ self.Dm
            return sp.vstack([Jc, self.G], format="csr")
        return self.G

    def hess_lag(self, xt, z):
        x = self.D * xt
        H = self.fs * self.prog.hess(x)
        if self.m_nl:
            H = H + self.prog.cons_hess(x, z[:self.m_nl] * self.cs)
        return sp.csr_matrix(self.Dm @ H @ self.Dm)


class _PhaseOne:
    """``min t  s.t.  g_i(x) - t <= 0 (shifted rows),  g_j(x) <= 0 (others),  t >= -1``.

    Only rows that are not already comfortably satisfied at the start are
    shifted by ``t``; the rest keep their own barrier so that loose bounds
    do not drag the search away from the region of interest.
    """

    def __init__(self, inner: _Scaled, shifted: np.ndarray):
        self.inner = inner
        self.n = inner.n + 1
        self.m = inner.m + 1
        self.m_nl = inner.m_nl
        self.shift = np.asarray(shifted, float)
        self.A = sp.hstack([inner.A, sp.csr_matrix((inner.A.shape[0], 1))], format="csr")
        self.b = inner.b

    def f(self, xt):
        return float(xt[-1])

    def grad(self, xt):
        g = np.zeros(self.n)
        g[-1] = 1.0
        return g

    def g(self, xt):
        return np.concatenate([self.inner.g(xt[:-1]) - self.shift * xt[-1], [-1.0 - xt[-1]]])

    def jac(self, xt):
        J = self.inner.jac(xt[:-1])
        top = sp.hstack([J, sp.csr_matrix(-self.shift[:, None])])
        last = sp.csr_matrix(([-1.0], ([0], [self.n - 1])), shape=(1, self.n))
        return sp.vstack([top, last], format="csr")

    def hess_lag(self, xt, z):
        H = self.inner.hess_lag(xt[:-1], z[:-1])
        return sp.block_diag([H, sp.csr_matrix((1, 1))], format="csr")


def _row_inf_norm(M: sp.csr_matrix) -> np.ndarray:
    M = sp.csr_matrix(M)
    if M.shape[0] == 0:
        return np.zeros(0)
    return np.asarray(abs(M).max(axis=1).todense()).ravel()


def _inf(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _residuals(prob, xt, y, z, mu=0.0, g=None, J=None, grad=None) -> KKTResiduals:
    g = prob.g(xt) if g is None else g
    J = prob.jac(xt) if J is None else J
    grad = prob.grad(xt) if grad is None else grad
    stat = grad + J.T @ z
    if prob.A.shape[0]:
        stat = stat + prob.A.T @ y
    scale = 1.0 + max(_inf(y), _inf(z))
    primal = max(_inf(prob.A @ xt - prob.b) if prob.A.shape[0] else 0.0,
                 float(np.max(g, initial=0.0)) if g.size else 0.0)
    comp = _inf(-g * z - mu) if g.size else 0.0
    return KKTResiduals(_inf(stat) / scale, primal, comp / scale)


def _internal_error(prob, xt, y, z, mu, g, J, grad, s_max=100.0) -> float:
    """Optimality error with averaged multiplier scaling (robust to a few huge duals)."""
    stat = grad + J.T @ z
    if prob.A.shape[0]:
        stat = stat + prob.A.T @ y
    m_tot = len(y) + len(z)
    sd = max(s_max, (np.abs(y).sum() + np.abs(z).sum()) / max(m_tot, 1)) / s_max
    sc = max(s_max, np.abs(z).sum() / max(len(z), 1)) / s_max
    primal = _inf(prob.A @ xt - prob.b) if prob.A.shape[0] else 0.0
    comp = _inf(-g * z - mu) if g.size else 0.0
    return max(_inf(stat) / sd, primal, comp / sc)


def kkt_residuals(program: ConvexProgram, point: np.ndarray, multipliers: tuple) -> KKTResiduals:
    """Scaled KKT residuals at ``point`` (physical units).

    ``multipliers`` is ``(y, z)`` in the solver's scaled convention, as
    stored in :attr:`Solution.duals`: ``y`` for the equalities, ``z`` for
    the inequalities (nonlinear rows first, then linear rows).
    Stationarity and complementarity are infinity norms divided by
    ``1 + max(|y|, |z|)``.
    """
    prob = _Scaled(program)
    y, z = multipliers
    return _residuals(prob, prob.from_phys(np.asarray(point, float)),
                      np.asarray(y, float), np.asarray(z, float))


def _barrier_value(prob, xt, mu):
    g = prob.g(xt)
    if not np.all(np.isfinite(g)) or np.any(g >= 0.0):
        return math.inf, g
    f = prob.f(xt)
    if not math.isfinite(f):
        return math.inf, g
    return f - mu * float(np.sum(np.log(-g))), g


def _kkt_solve(W, A, r1, r2, delta_c=0.0):
    n = W.shape[0]
    me = A.shape[0]
    if me:
        K = sp.bmat([[W, A.T], [A, None]], format="csc")
        Kf = sp.bmat([[W, A.T], [A, -delta_c * sp.eye(me)]], format="csc") if delta_c else K
        rhs = np.concatenate([r1, r2])
    else:
        K = Kf = sp.csc_matrix(W)
        rhs = r1
    lu = spla.splu(Kf, permc_spec="COLAMD")
    sol = lu.solve(rhs)
    # iterative refinement against the unregularised system: barrier terms near active
    # bounds make K badly conditioned, and a regularised constraint block would
    # otherwise leak delta_c * y into the linear equality rows
    best = _inf(rhs - K @ sol)
    for _ in range(4 if delta_c else 2):
        if not math.isfinite(best) or best <= 1e-14 * (1.0 + _inf(rhs)):
            break
        trial = sol + lu.solve(rhs - K @ sol)
        err = _inf(rhs - K @ trial)
        if not err < best:
            break
        sol, best = trial, err
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("non-finite solution of KKT system")
    return sol[:n], sol[n:]


def _newton_direction(prob, W, A, r1, r2, state):
    """Solve the KKT system, regularising until the direction has positive curvature."""
    n = W.shape[0]
    I = sp.eye(n, format="csr")
    delta = 0.0
    delta_c = 0.0
    for _ in range(60):
        try:
            dx, y = _kkt_solve(W + delta * I if delta else W, A, r1, r2, delta_c)
        except RuntimeError:
            # structurally or numerically singular: regularise the constraint block
            delta_c = max(delta_c * 10.0, 1e-8)
            if delta == 0.0:
                delta = state.get("last_delta", 0.0) or 1e-8
            continue
        curv = float(dx @ (W @ dx)) + delta * float(dx @ dx)
        # variables are scaled to order one and bounded, so an enormous step comes from a
        # nearly singular factorisation that splu returned without complaint
        if curv >= 1e-12 * float(dx @ dx) and _inf(dx) <= 1e6:
            if delta:
                state["last_delta"] = delta
            return dx, y, delta
        if delta == 0.0:
            delta = max(1e-4, state.get("last_delta", 0.0) / 3.0)
        else:
            delta *= 8.0
        if delta > 1e40:
            break
    raise FloatingPointError("could not obtain a descent direction")


def _ipm(prob, xt, opts: SolverOptions, mu0: float, stop=None, max_iter=None):
    """Core barrier iterations from a strictly feasible ``xt``.

    Returns ``(xt, y, z, status, iterations, mu, history)``.  ``stop`` is
    an optional predicate on the iterate that ends the run early with
    status ``"stopped"``.
    """
    tol = opts.kkt_tolerance
    max_iter = opts.max_iterations if max_iter is None else max_iter
    mu = mu0
    g = prob.g(xt)
    z = mu / -g
    me = prob.A.shape[0]
    y = np.zeros(me)
    history = []
    iterates = []
    state: dict = {}
    # factor A A^T once to project directions back onto the linear equalities
    aat = None
    if me:
        try:
            aat = spla.splu(sp.csc_matrix(prob.A @ prob.A.T), permc_spec="COLAMD")
        except RuntimeError:
            aat = None
    status = "max_iter"
    it = 0
    while True:
        g = prob.g(xt)
        J = prob.jac(xt)
        grad = prob.grad(xt)
        s = -g
        if stop is not None and stop(xt, g):
            status = "stopped"
            break
        if _internal_error(prob, xt, y, z, 0.0, g, J, grad) <= tol:
            status = "optimal"
            break
        if it >= max_iter:
            break
        # barrier-subproblem convergence: tighten mu (possibly several times)
        while True:
            if (_internal_error(prob, xt, y, z, mu, g, J, grad) > opts.barrier_error_factor * mu
                    or mu <= tol / 10.0):
                break
            mu = max(tol / 10.0, min(opts.barrier_decrease * mu, mu ** opts.barrier_superlinear))
        sigma = z / s
        W = prob.hess_lag(xt, z) + J.T @ sp.diags(sigma) @ J
        W = sp.csr_matrix(W)
        grad_phi = grad + J.T @ (mu / s)
        r2 = -(prob.A @ xt - prob.b) if me else np.zeros(0)
        try:
            dx, y_new, _ = _newton_direction(prob, W, prob.A, -grad_phi, r2, state)
        except FloatingPointError as exc:
            log.debug("direction failure: %s", exc)
            status = "numerical"
            break
        if aat is not None:
            # an ill-conditioned KKT solve can drift off the linear equalities, and short
            # steps near active bounds would then never recover; remove small drift
            e = prob.A @ dx - r2
            if _inf(e) > 1e-12 * (1.0 + _inf(r2)):
                corr = prob.A.T @ aat.solve(e)
                if np.all(np.isfinite(corr)) and _inf(corr) <= 1e-6 * (1.0 + _inf(dx)):
                    dx = dx - corr
        Jdx = J @ dx
        dz = (mu - s * z) / s + sigma * Jdx
        tau = max(0.99, 1.0 - mu)

        def max_step(v, dv):
            neg = dv < 0
            if not np.any(neg):
                return 1.0
            return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))

        alpha = max_step(s, -Jdx)
        alpha_z = max_step(z, dz)
        phi0, _ = _barrier_value(prob, xt, mu)
        slope = float(grad_phi @ dx)
        tiny = _inf(dx) <= 10 * np.finfo(float).eps * (1.0 + _inf(xt))
        accepted = False
        for _ in range(opts.max_backtracks):
            x_try = xt + alpha * dx
            phi, g_try = _barrier_value(prob, x_try, mu)
            if math.isfinite(phi) and np.all(-g_try >= (1.0 - tau) * s):
                if tiny or phi <= phi0 + opts.armijo * alpha * min(slope, 0.0):
                    accepted = True
                    break
            alpha *= opts.backtrack
        if not accepted:
            status = "numerical"
            log.debug("line search failed at iteration %d (mu=%g)", it, mu)
            break
        history.append((mu, phi0, phi))
        if log.isEnabledFor(logging.DEBUG):
            log.debug("it %3d  mu %.2e  err %.2e  alpha %.2e/%.2e  |dx| %.2e", it, mu,
                      _internal_error(prob, xt, y, z, 0.0, g, J, grad), alpha, alpha_z, _inf(dx))
        if opts.record_history:
            iterates.append(x_try.copy())
        xt = x_try
        z = z + alpha_z * dz
        s_new = -g_try
        kappa = 1e10
        z = np.clip(z, mu / (kappa * s_new), kappa * mu / s_new)
        y = y_new
        it += 1
    return xt, y, z, status, it, mu, history, iterates


def solve_program(program: ConvexProgram, opts: SolverOptions | None = None,
                  start: np.ndarray | None = None):
    """Solve ``program``; returns ``(x, (y, z), SolveStats)`` with ``x`` in physical units.

    ``start`` overrides ``program.x0`` as the initial point.
    """
    opts = opts or SolverOptions()
    prob = _Scaled(program)
    xt = prob.from_phys(np.asarray(program.x0 if start is None else start, float))
    # restore exact equality feasibility of the starting point
    if prob.A.shape[0]:
        r = prob.A @ xt - prob.b
        if _inf(r) > 1e-12:
            corr = spla.lsqr(prob.A, -r, atol=1e-15, btol=1e-15, iter_lim=10 * prob.n)[0]
            xt = xt + corr
    g0 = prob.g(xt)
    phase_one_iters = 0
    message = ""
    if not (np.all(np.isfinite(g0)) and np.all(g0 < 0.0)):
        if not opts.feasibility_restoration:
            res = _residuals(prob, xt, np.zeros(prob.A.shape[0]), np.zeros(prob.m))
            return (prob.to_phys(xt), None,
                    SolveStats("infeasible", 0, res, float("nan"),
                               message="starting point not strictly feasible"))
        margin = opts.phase_one_margin
        shifted = ~(np.isfinite(g0) & (g0 < -margin))
        p1 = _PhaseOne(prob, shifted)
        worst = float(np.nanmax(g0)) if np.any(np.isfinite(g0)) else 1.0
        t0 = max(worst, 0.0) + max(0.1, 0.1 * abs(worst))
        xt1 = np.concatenate([xt, [t0]])

        def feasible_enough(v, g):
            return v[-1] < -margin and np.all(g[:-1] + p1.shift * v[-1] < 0.0)

        x1, _, _, st1, phase_one_iters, _, _, _ = _ipm(p1, xt1, opts, opts.initial_barrier_weight,
                                                       stop=feasible_enough)
        xt = x1[:-1]
        gx = prob.g(xt)
        if not (np.all(np.isfinite(gx)) and np.all(gx < 0.0)):
            status = "infeasible" if st1 == "optimal" else st1
            message = (f"phase one ended ({st1}) with max scaled violation {float(np.max(gx)):.3g}; "
                       "no strictly feasible point found")
            res = _residuals(prob, xt, np.zeros(prob.A.shape[0]), np.zeros(prob.m))
            stats = SolveStats(status if status != "stopped" else "infeasible", phase_one_iters, res,
                               float("nan"), phase_one_iterations=phase_one_iters, message=message)
            return prob.to_phys(xt), None, stats
        message = f"phase one found a strictly feasible point in {phase_one_iters} iterations"

    budget = max(1, opts.max_iterations - phase_one_iters)
    xt, y, z, status, iters, mu, history, iterates = _ipm(prob, xt, opts, opts.initial_barrier_weight,
                                                          max_iter=budget)
    res = _residuals(prob, xt, y, z)
    x = prob.to_phys(xt)
    obj = program.f(x) + program.objective_offset
    stats = SolveStats(status=status, iterations=iters + phase_one_iters, residuals=res,
                       objective=obj, phase_one_iterations=phase_one_iters, message=message,
                       barrier_weight=mu, merit_history=history,
                       iterates=[prob.to_phys(v) for v in iterates])
    return x, (y, z), stats


def _strictly_feasible(program: ConvexProgram, x: np.ndarray) -> bool:
    prob = _Scaled(program)
    xt = prob.from_phys(x)
    g = prob.g(xt)
    eq_ok = prob.A.shape[0] == 0 or _inf(prob.A @ xt - prob.b) <= 1e-9
    return bool(eq_ok and np.all(np.isfinite(g)) and np.all(g < 0.0))


def _data_seeded_start(program: ConvexProgram, opts: SolverOptions):
    """Strictly feasible start for an energy program built from a data-maximising solve.

    Returns ``(x, max_data_bits, message)``.  ``x`` is None when no start
    was found; ``max_data_bits`` is set when the loads provably exceed
    what the scenario can deliver.
    """
    # imported here to keep the solver usable on hand-built programs
    from .transcription import RATE_UNIT, build_program

    cfg = program.cfg
    if cfg is None or program.kind != "energy" or cfg.relaying_enabled:
        return None, None, ""
    loads = np.array([nd.initial_data for nd in cfg.nodes])
    fair = build_program(cfg, "fair_data")
    loose = replace(opts, kkt_tolerance=max(opts.kkt_tolerance, 1e-3), record_history=False)
    lay = fair.layout
    for attempt in (loose, replace(loose, kkt_tolerance=opts.kkt_tolerance)):
        x, _, st = solve_program(fair, attempt)
        if st.status != "optimal":
            return None, None, f"data-maximising seed solve ended {st.status}"
        s0 = np.array([x[lay.index("s", n, 0)] for n in range(1, cfg.n_nodes + 1)])
        short = (loads > 0.0) & (s0 <= loads * (1.0 + 1e-9))
        if not np.any(short):
            break
    if np.any(short):
        if cfg.n_nodes == 1:
            # one node: the seed objective is monotone in delivered data, so
            # a converged solve gives the exact maximum
            xm, _, stm = solve_program(build_program(cfg, "max_data"), replace(opts, record_history=False))
            best = float(xm[lay.index("s", 1, 0)])
            if stm.status == "optimal" and best < loads[0]:
                return None, best, (f"at most {best:.6g} bits are deliverable, "
                                    f"{loads[0]:.6g} are required")
        return None, None, "data-maximising seed cannot serve every load"
    for node in range(1, cfg.n_nodes + 1):
        c = loads[node - 1] / s0[node - 1] if loads[node - 1] > 0.0 else 0.0
        for m in cfg.outgoing(node):
            x[lay.index("r", (node, m))] *= c
        x[lay.index("s", node)] *= c
    if not _strictly_feasible(program, x):
        return None, None, "scaled seed is not strictly feasible"
    return x, None, f"seeded from a data-maximising solve ({st.iterations} iterations)"


def solve(program: ConvexProgram, opts: SolverOptions | None = None) -> tuple[Solution, SolveStats]:
    """Solve a transcribed program and unpack the trajectories.

    When the default starting point of an energy program is not strictly
    feasible, a start is first sought from a data-maximising solve of the
    same scenario; this also certifies infeasibility for a single node.
    The generic phase-one search is the fallback.
    """
    opts = opts or SolverOptions()
    start = None
    note = ""
    if (opts.feasibility_restoration and program.kind == "energy"
            and not _strictly_feasible(program, np.asarray(program.x0, float))):
        start, best, note = _data_seeded_start(program, opts)
        if best is not None:
            prob = _Scaled(program)
            xt = prob.from_phys(np.asarray(program.x0, float))
            res = _residuals(prob, xt, np.zeros(prob.A.shape[0]), np.zeros(prob.m))
            stats = SolveStats("infeasible", 0, res, float("nan"), message=note)
            return unpack(program, np.asarray(program.x0, float), stats=stats), stats
    x, duals, stats = solve_program(program, opts, start=start)
    if note and start is not None:
        stats.message = (note + "; " + stats.message).rstrip("; ")
    sol = unpack(program, x, stats=stats, duals=duals)
    return sol, stats


# --------------------------------------------------------------------------
# derivative verification


def _central(fun, x, step):
    """Central difference of ``fun`` along ``step``, Richardson-extrapolated.

    Combining steps ``h`` and ``h/2`` cancels the ``h**2`` error term, which
    matters for the capacity rows: at high SNR their third derivatives are
    large enough to swamp a plain central difference.
    """
    def diff(s):
        return (fun(x + s) - fun(x - s)) / 2.0

    return (8.0 * diff(step / 2) - diff(step)) / 3.0


def derivative_check(program: ConvexProgram, point: np.ndarray, h: float = 1e-5,
                     n_directions: int = 3, seed: int = 0) -> float:
    """Worst relative error of analytic derivatives against central differences.

    Works in the solver's scaled coordinates with step ``h``.  Checks the
    objective gradient and every constraint-Jacobian entry coordinate by
    coordinate, and Hessian-vector products of the objective and of
    randomly weighted constraint sums along random directions.  Differences
    are Richardson-extrapolated (steps ``h`` and ``h/2``).  Errors are
    ``|analytic - fd|_inf / max(1, |analytic|_inf)``.
    """
    prob = _Scaled(program)
    xt = prob.from_phys(np.asarray(point, float))
    rng = np.random.default_rng(seed)
    n = prob.n
    worst = 0.0

    def rel(a, b):
        return _inf(a - b) / max(1.0, _inf(a))

    fd_grad = np.empty(n)
    fd_jac = np.empty((prob.m, n)) if prob.m_nl else None
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd_grad[i] = _central(prob.f, xt, e) / h
        if fd_jac is not None:
            fd_jac[:, i] = _central(prob.g, xt, e) / h
    worst = max(worst, rel(prob.grad(xt), fd_grad))
    if fd_jac is not None:
        worst = max(worst, rel(prob.jac(xt).toarray(), fd_jac))

    zero = np.zeros(prob.m)
    for _ in range(n_directions):
        d = rng.standard_normal(n)
        d /= _inf(d)
        hv = prob.hess_lag(xt, zero) @ d
        fd = _central(prob.grad, xt, h * d) / h
        worst = max(worst, rel(hv, fd))
        if prob.m_nl:
            wts = np.concatenate([rng.uniform(0.0, 1.0, prob.m_nl), np.zeros(prob.m - prob.m_nl)])
            hv = (prob.hess_lag(xt, wts) - prob.hess_lag(xt, zero)) @ d
            fd = _central(lambda v: prob.jac(v).T @ wts, xt, h * d) / h
            worst = max(worst, rel(hv, fd))
    return worst
