"""Trajectory optimization: penalty sequential convex programming.

Decision variables are the chain's joint values at every timestep after the
first.  Joint limits, velocity and acceleration bounds, frozen joints and the
trust region are hard linear constraints of each convex subproblem; the goal,
closure (anchor) and collision constraints are linearized with finite
differences and enter as l1 penalties whose weight grows while they stay
violated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..kinematics import fk_matrices
from ..world import CollisionModel, Scene
from .core import (MotionRequest, MotionResult, Trajectory, anchor_residual, check_trajectory,
                   goal_residual)

_BIG = 1e4  # stands in for infinite joint limits inside the QP


@dataclass(frozen=True)
class OptimizerConfig:
    T: int = 20
    dt: float = 0.25
    w_vel: tuple | None = None  # per-joint diagonal weights; None means identity
    w_acc: tuple | None = None
    mu0: float = 10.0
    mu_growth: float = 10.0
    max_outer: int = 6
    max_inner: int = 25
    trust_radius: float = 0.2
    trust_shrink: float = 0.3
    trust_expand: float = 1.5
    min_trust: float = 1e-5
    eps_c: float = 1e-5
    eps_f: float = 1e-7
    margin: float = 0.01
    buffer: float = 0.01  # extra clearance targeted inside the solver
    activation: float = 0.15  # pairs farther than margin + activation are ignored
    max_pairs: int = 6
    fd_step: float = 1e-6
    solver: str = "CLARABEL"

    def __post_init__(self):
        if self.T < 3:
            raise ValueError("T must be at least 3")
        if self.mu_growth <= 1:
            raise ValueError("penalty growth factor must exceed 1")
        for w in (self.w_vel, self.w_acc):
            if w is not None and min(w) < 0:
                raise ValueError("weights must be nonnegative")

    def weights(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        wv = np.ones(n) if self.w_vel is None else np.asarray(self.w_vel, dtype=float)
        wa = np.ones(n) if self.w_acc is None else np.asarray(self.w_acc, dtype=float)
        if wv.shape != (n,) or wa.shape != (n,):
            raise ValueError(f"weights must have one entry per joint ({n})")
        return wv, wa


# ---------------------------------------------------------------------------
# smoothness objective


def objective(points, cfg: OptimizerConfig | None = None) -> float:
    """Weighted sum of squared first and second differences."""
    P = np.asarray(points.points if isinstance(points, Trajectory) else points, dtype=float)
    wv, wa = (cfg or OptimizerConfig()).weights(P.shape[1])
    v = np.diff(P, axis=0)
    a = np.diff(P, n=2, axis=0)
    return float(np.sum(v * v * wv) + np.sum(a * a * wa))


def objective_grad(points, cfg: OptimizerConfig | None = None) -> np.ndarray:
    """Gradient of :func:`objective` with respect to every point."""
    P = np.asarray(points.points if isinstance(points, Trajectory) else points, dtype=float)
    wv, wa = (cfg or OptimizerConfig()).weights(P.shape[1])
    G = np.zeros_like(P)
    v = 2 * np.diff(P, axis=0) * wv
    G[1:] += v
    G[:-1] -= v
    a = 2 * np.diff(P, n=2, axis=0) * wa
    G[2:] += a
    G[1:-1] -= 2 * a
    G[:-2] += a
    return G


# ---------------------------------------------------------------------------
# problem data


class _Problem:
    """Residuals and finite-difference Jacobians for one request."""

    def __init__(self, req: MotionRequest, scene: Scene, cfg: OptimizerConfig):
        self.req, self.cfg = req, cfg
        self.chain = req.chain
        self.n = self.chain.dof
        self.model = CollisionModel(scene, self.chain, req.ignore)
        self.target = cfg.margin + cfg.buffer

    def goal(self, q):
        return goal_residual(self.req.goal, self.chain, q)

    def anchor(self, q):
        return anchor_residual(self.req.anchor, self.chain, q)

    def dist(self, q):
        return self.model.distances(q)

    def _jac(self, f, q, f0):
        h = self.cfg.fd_step
        J = np.empty((f0.size, self.n))
        for i in range(self.n):
            dq = q.copy()
            dq[i] += h
            J[:, i] = (f(dq) - f0) / h
        return J

    def goal_lin(self, q):
        r = self.goal(q)
        return r, self._jac(self.goal, q, r)

    def anchor_lin(self, q):
        r = self.anchor(q)
        return r, self._jac(self.anchor, q, r)

    def coll_lin(self, q):
        """Closest active pairs: values and gradients, padded to ``max_pairs`` rows."""
        K = self.cfg.max_pairs
        d = self.dist(q)
        vals = np.full(K, _BIG)
        J = np.zeros((K, self.n))
        if d.size == 0:
            return vals, J
        order = np.argsort(d)[:K]
        order = order[d[order] < self.target + self.cfg.activation]
        if order.size == 0:
            return vals, J
        h = self.cfg.fd_step
        for i in range(self.n):
            dq = q.copy()
            dq[i] += h
            J[: order.size, i] = (self.dist(dq)[order] - d[order]) / h
        vals[: order.size] = d[order]
        return vals, J

    def violations(self, P):
        """(goal, anchor, collision) violation sums for points 1..T-1."""
        g = float(np.abs(self.goal(P[-1])).sum())
        a = sum(float(np.abs(self.anchor(q)).sum()) for q in P[1:]) if self.req.anchor is not None else 0.0
        c = 0.0
        for q in P[1:]:
            d = self.dist(q)
            if d.size:
                c += float(np.maximum(self.target - d, 0.0).sum())
        return g, a, c

    def merit(self, P, mu):
        g, a, c = self.violations(P)
        return objective(P, self.cfg) + mu * (g + a + c), (g, a, c)


# ---------------------------------------------------------------------------
# convex subproblem


class _QP:
    """Parametrized convex subproblem, compiled once per problem shape."""

    _cache: dict = {}

    @classmethod
    def get(cls, T, n, k, has_anchor, K, wv, wa, solver):
        key = (T, n, k, has_anchor, K, tuple(wv), tuple(wa), solver)
        qp = cls._cache.get(key)
        if qp is None:
            qp = cls(T, n, k, has_anchor, K, wv, wa, solver)
            cls._cache[key] = qp
        return qp

    def __init__(self, T, n, k, has_anchor, K, wv, wa, solver):
        import cvxpy as cp

        self.cp = cp
        self.solver = solver
        m = T - 1
        X = cp.Variable((m, n))
        self.X = X
        self.q0 = cp.Parameter(n)
        self.lo = cp.Parameter((m, n))
        self.hi = cp.Parameter((m, n))
        self.xc = cp.Parameter((m, n))
        self.delta = cp.Parameter(nonneg=True)
        self.vb = cp.Parameter(n, nonneg=True)
        self.ab = cp.Parameter(n, nonneg=True)
        Q = cp.vstack([cp.reshape(self.q0, (1, n), order="C"), X])
        V = Q[1:] - Q[:-1]
        A = Q[2:] - 2 * Q[1:-1] + Q[:-2]
        cost = cp.sum_squares(V @ np.diag(np.sqrt(wv))) + cp.sum_squares(A @ np.diag(np.sqrt(wa)))
        cons = [X >= self.lo, X <= self.hi, cp.abs(X - self.xc) <= self.delta]
        ones_v = np.ones((m, 1))
        ones_a = np.ones((m - 1, 1))
        cons += [cp.abs(V) <= ones_v @ cp.reshape(self.vb, (1, n), order="C"),
                 cp.abs(A) <= ones_a @ cp.reshape(self.ab, (1, n), order="C")]
        # penalty rows, pre-multiplied by the penalty weight
        self.Jg = cp.Parameter((k, n))
        self.cg = cp.Parameter(k)
        pen = cp.sum(cp.abs(self.Jg @ X[m - 1] + self.cg))
        self.Ja, self.ca = [], []
        if has_anchor:
            for t in range(m):
                Ja = cp.Parameter((6, n))
                ca = cp.Parameter(6)
                self.Ja.append(Ja)
                self.ca.append(ca)
                pen = pen + cp.sum(cp.abs(Ja @ X[t] + ca))
        self.Jc, self.cc = [], []
        for t in range(m):
            Jc = cp.Parameter((K, n))
            cc = cp.Parameter(K)
            self.Jc.append(Jc)
            self.cc.append(cc)
            pen = pen + cp.sum(cp.pos(-(Jc @ X[t]) + cc))
        self.prob = cp.Problem(cp.Minimize(cost + pen), cons)
        assert self.prob.is_dcp(dpp=True)

    def solve(self):
        self.prob.solve(solver=self.solver, warm_start=True)
        if self.X.value is None or self.prob.status not in ("optimal", "optimal_inaccurate"):
            return None
        return np.array(self.X.value)


# ---------------------------------------------------------------------------
# initialization


def goal_seed(req: MotionRequest, scene: Scene | None = None, start=None, rng=None,
              reg: float = 1e-2) -> np.ndarray:
    """Configuration near ``start`` minimizing goal and closure residuals."""
    chain = req.chain
    q0 = np.asarray(req.start if start is None else start, dtype=float)
    lo = np.where(np.isfinite(chain.lower), chain.lower, -1e3)
    hi = np.where(np.isfinite(chain.upper), chain.upper, 1e3)
    free = [i for i in range(chain.dof) if i not in req.frozen]
    lo_f, hi_f = lo[free], hi[free]
    # strictly interior bounds keep the trust-region solver well defined
    eps = 1e-9
    x0 = np.clip(q0[free], lo_f + eps, hi_f - eps)

    def full(x):
        q = np.array(req.start, dtype=float)
        q[free] = x
        return q

    def fun(x):
        q = full(x)
        mats = fk_matrices(chain, q)
        parts = [goal_residual(req.goal, chain, q, mats) * 10.0,
                 anchor_residual(req.anchor, chain, q, mats) * 10.0,
                 reg * (x - q0[free])]
        return np.concatenate(parts)

    sol = least_squares(fun, x0, bounds=(lo_f, hi_f), xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400)
    return full(sol.x)


def linear_init(req: MotionRequest, q_goal: np.ndarray, T: int, dt: float) -> np.ndarray:
    """Straight line to ``q_goal``, shortened if needed so velocity bounds hold."""
    chain = req.chain
    d = q_goal - req.start
    step = np.abs(d) / (T - 1)
    cap = chain.vel_bounds * dt * 0.999
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(step > 0, cap / step, np.inf)
    s = min(1.0, float(ratio.min())) if ratio.size else 1.0
    return req.start + np.linspace(0.0, s, T)[:, None] * d[None, :]


# ---------------------------------------------------------------------------
# solver


def optimize(req: MotionRequest, scene: Scene, cfg: OptimizerConfig = OptimizerConfig(),
             init: np.ndarray | None = None) -> MotionResult:
    """Smooth, feasible trajectory for ``req`` or a failure report.

    The result's ``info`` holds the iteration count, final penalty weight,
    the violation triple (goal, anchor, collision) and the merit history of
    accepted steps.
    """
    prob = _Problem(req, scene, cfg)
    chain = req.chain
    n, T, dt = chain.dof, cfg.T, cfg.dt
    wv, wa = cfg.weights(n)
    if init is None:
        init = linear_init(req, goal_seed(req, scene), T, dt)
    P = np.array(init, dtype=float)
    if P.shape != (T, n):
        raise ValueError(f"initial trajectory must have shape ({T}, {n})")
    P[0] = req.start
    has_anchor = req.anchor is not None
    qp = _QP.get(T, n, req.goal.k, has_anchor, cfg.max_pairs, wv, wa, cfg.solver)

    lo = np.where(np.isfinite(chain.lower), chain.lower, -_BIG)
    hi = np.where(np.isfinite(chain.upper), chain.upper, _BIG)
    LO = np.tile(lo, (T - 1, 1))
    HI = np.tile(hi, (T - 1, 1))
    for i in req.frozen:
        LO[:, i] = HI[:, i] = req.start[i]
    P[1:] = np.clip(P[1:], LO, HI)
    qp.q0.value = req.start
    qp.lo.value, qp.hi.value = LO, HI
    qp.vb.value = chain.vel_bounds * dt
    qp.ab.value = chain.acc_bounds * dt * dt

    mu = cfg.mu0
    delta = cfg.trust_radius
    history = []
    iters = 0
    merit, viol = prob.merit(P, mu)
    for outer in range(cfg.max_outer):
        merit, viol = prob.merit(P, mu)
        for inner in range(cfg.max_inner):
            iters += 1
            rg, Jg = prob.goal_lin(P[-1])
            lin = [(prob.anchor_lin(q) if has_anchor else None, prob.coll_lin(q)) for q in P[1:]]
            qp.Jg.value = mu * Jg
            qp.cg.value = mu * (rg - Jg @ P[-1])
            for t, (an, (cv, Jc)) in enumerate(lin):
                q = P[t + 1]
                if has_anchor:
                    ra, Ja = an
                    qp.Ja[t].value = mu * Ja
                    qp.ca[t].value = mu * (ra - Ja @ q)
                qp.Jc[t].value = mu * Jc
                qp.cc[t].value = mu * (prob.target - cv + Jc @ q)
            model_here = objective(P, cfg) + mu * (
                float(np.abs(rg).sum())
                + sum(float(np.abs(an[0]).sum()) for an, _ in lin if an is not None)
                + sum(float(np.maximum(prob.target - cv, 0).sum()) for _, (cv, _) in lin))
            improved = False
            while delta >= cfg.min_trust:
                qp.xc.value = P[1:]
                qp.delta.value = delta
                X = qp.solve()
                if X is None:
                    delta *= cfg.trust_shrink
                    continue
                model_new = float(qp.prob.value)
                pred = model_here - model_new
                if pred <= cfg.eps_f * max(1.0, abs(model_here)):
                    break
                Pn = np.vstack([req.start, X])
                merit_new, viol_new = prob.merit(Pn, mu)
                actual = merit - merit_new
                if actual > 0.1 * pred:
                    P, merit, viol = Pn, merit_new, viol_new
                    history.append(merit)
                    delta = min(delta * cfg.trust_expand, 1.0)
                    improved = True
                    break
                delta *= cfg.trust_shrink
            if not improved:
                break
        if max(viol) <= cfg.eps_c:
            break
        mu *= cfg.mu_growth
        delta = max(delta, cfg.trust_radius * 0.1)

    traj = Trajectory(P, chain, dt)
    report = check_trajectory(traj, scene, req, cfg.margin)
    info = {"iterations": iters, "mu": mu, "violation": viol, "merit_history": history}
    return MotionResult(not report, traj, report, info)


def optimize_restarts(req: MotionRequest, scene: Scene, cfg: OptimizerConfig = OptimizerConfig(),
                      restarts: int = 4, seed: int = 0) -> MotionResult:
    """``optimize`` from the default initialization, then from goal seeds
    found near randomly perturbed starts until one attempt audits clean."""
    rng = np.random.default_rng(seed)
    free = [i for i in range(req.chain.dof) if i not in req.frozen]
    res = optimize(req, scene, cfg)
    attempts = 1
    for _ in range(restarts):
        if res.success:
            break
        start = np.array(req.start, dtype=float)
        start[free] += rng.normal(0.0, 0.7, size=len(free))
        start = np.clip(start, req.chain.lower, req.chain.upper)
        init = linear_init(req, goal_seed(req, scene, start=start), cfg.T, cfg.dt)
        res = optimize(req, scene, cfg, init=init)
        attempts += 1
    res.info["attempts"] = attempts
    return res
