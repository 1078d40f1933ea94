"""Alternating degree-distribution optimization under a DE contraction slack.

Both steps keep the contraction condition F(y) <= (1 - delta) y on the grid,
where F is one DE iteration acting on the CN->VN erasure probability y.

* CN step: with lambda fixed the condition is linear in rho, so maximizing the
  mean CN degree (minimizing sum rho_i / i) is an LP.
* VN step: with rho fixed the condition reads
  ``1/2 L(y) lambda(y) <= t(y) := 1 - rho^{-1}(1 - (1 - delta) y)``.
  Writing ``kappa = sum lambda_i / i`` and ``A(y) = sum lambda_i y^i / i`` gives
  ``L = A / kappa``, so the constraint ``1/2 A(y) lambda(y) - t(y) kappa <= 0``
  is a bilinear form in lambda.  It is handled by sequential linear programming
  with a trust region; every accepted iterate is re-certified with the full DE
  margin, so the objective kappa increases monotonically over feasible points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .degree_model import (
    DegreeDistribution,
    EnsembleSpec,
    Perspective,
    Side,
    as_edge,
    as_node,
    design_rate,
    eval_poly,
)
from .density_evolution import feasibility_margin, grid_points
from .lp import linprog

STRICT_EPS = 1e-9
PRUNE = 1e-12


class Infeasible(RuntimeError):
    pass


class Stalled(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    l_max: int = 20
    r_max: int = 30
    delta: float = 1e-3
    grid: int = 256
    max_rounds: int = 10
    n_for_delta: int | None = None
    c: float = 0.5
    seed: int = 0
    l_min: int = 1
    l1_cap: float | None = None
    restarts: int = 2
    slp_iters: int = 300
    refine_rounds: int = 20

    def __post_init__(self):
        if self.l_max < 1 or self.r_max < 2 or self.grid < 32:
            raise ValueError("need l_max >= 1, r_max >= 2 and grid >= 32")
        if not 1 <= self.l_min <= self.l_max:
            raise ValueError("need 1 <= l_min <= l_max")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.n_for_delta is not None and self.n_for_delta < 1:
            raise ValueError("n_for_delta must be positive")
        if self.l1_cap is not None and not 0 <= self.l1_cap <= 1:
            raise ValueError("l1_cap must lie in [0, 1]")

    @property
    def effective_delta(self) -> float:
        if self.n_for_delta is not None:
            return self.c / math.sqrt(self.n_for_delta)
        return self.delta


def _edge_dist(degrees: np.ndarray, values: np.ndarray, side: Side) -> DegreeDistribution:
    v = np.where(values > PRUNE, values, 0.0)
    v = v / v.sum()
    return DegreeDistribution(
        {int(d): float(x) for d, x in zip(degrees, v) if x > 0}, Perspective.EDGE, side
    )


def _certified(lam: DegreeDistribution, rho: DegreeDistribution, delta: float, grid: int) -> float:
    return feasibility_margin(lam, rho, delta, grid)[0]


# -- CN step ----------------------------------------------------------------


def _rho_lp(u: np.ndarray, ys: np.ndarray, degs: np.ndarray, delta: float):
    # sum_i rho_i u^(i-1) >= 1 - (1 - delta - eps) y
    A = u[:, None] ** (degs[None, :] - 1)
    rhs = 1.0 - (1.0 - delta - STRICT_EPS) * ys
    return linprog(
        1.0 / degs,
        A_ub=-A,
        b_ub=-rhs,
        A_eq=np.ones((1, degs.size)),
        b_eq=[1.0],
    )


def _golden_min(f, a: float, b: float, iters: int = 60) -> float:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return c if fc < fd else d


def _dense_points(grid: int) -> np.ndarray:
    return grid_points(32 * grid + 31)


def _margin_cuts(lam: DegreeDistribution, rho: DegreeDistribution, delta: float, dense: np.ndarray) -> np.ndarray:
    """Points where the relative margin is not positive, found between grid points.

    A dense scan catches outright violations; each near-tight local minimum is
    then polished by golden-section search.
    """
    L = as_node(lam)

    def margin(y):
        x = 0.5 * eval_poly(L, y) * eval_poly(lam, y)
        return (y - 1.0 + eval_poly(rho, 1.0 - x)) / y - delta

    fm = margin(dense)
    cuts = list(dense[fm <= 0])
    inner = np.flatnonzero((fm[1:-1] <= fm[:-2]) & (fm[1:-1] <= fm[2:]) & (fm[1:-1] < 1e-6)) + 1
    for k in inner:
        y = _golden_min(lambda t: float(margin(t)), float(dense[k - 1]), float(dense[k + 1]))
        if margin(y) <= 0.5 * STRICT_EPS:
            cuts.append(y)
    return np.asarray(cuts, dtype=np.float64)


def optimize_cn(vn: DegreeDistribution, cfg: OptimizerConfig) -> DegreeDistribution:
    """Edge-perspective rho of maximal mean CN degree keeping the DE margin.

    The LP is solved on the configured grid.  The margin is then minimized
    between grid points (dense scan plus golden-section polish); every point
    where it is not positive becomes a cut and the LP is re-solved.
    """
    delta = cfg.effective_delta
    if delta >= 1.0:
        raise Infeasible("delta >= 1 leaves no room for contraction")
    Ln, lam = as_node(vn), as_edge(vn)
    degs = np.arange(2, cfg.r_max + 1, dtype=np.float64)

    def u_of(y):
        return 1.0 - 0.5 * eval_poly(Ln, y) * eval_poly(lam, y)

    ys = grid_points(cfg.grid)
    dense = _dense_points(cfg.grid)
    rho = None
    for _ in range(cfg.refine_rounds + 1):
        res = _rho_lp(u_of(ys), ys, degs, delta)
        if not res.ok:
            raise Infeasible(f"CN LP {res.status.value} at delta={delta:g}")
        rho = _edge_dist(degs, res.x, Side.CHECK)
        if _certified(lam, rho, delta, cfg.grid) <= 0:
            raise Infeasible("CN LP solution fails certification")

        cuts = _margin_cuts(lam, rho, delta, dense)
        if cuts.size == 0:
            return rho
        ys = np.union1d(ys, cuts)
    return rho


# -- VN step ----------------------------------------------------------------


def _rho_inverse(rho: DegreeDistribution, target: np.ndarray) -> np.ndarray:
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = eval_poly(rho, mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


class _VnProblem:
    """Grid constraints g_k(lambda) <= 0, scaled by 1/y_k."""

    def __init__(self, rho: DegreeDistribution, cfg: OptimizerConfig, ys: np.ndarray):
        self.cfg = cfg
        self.rho = as_edge(rho)
        self.delta = cfg.effective_delta
        self.degs = np.arange(cfg.l_min, cfg.l_max + 1, dtype=np.float64)
        self.ys = ys
        target = 1.0 - (1.0 - self.delta - STRICT_EPS) * ys
        # bisection returns an upper bracket of rho^{-1}; t is thus conservative
        self.t = 1.0 - _rho_inverse(self.rho, np.clip(target, 0.0, 1.0))
        self.P1 = ys[:, None] ** self.degs[None, :] / self.degs[None, :]
        self.P2 = ys[:, None] ** (self.degs[None, :] - 1)
        self.inv = 1.0 / self.degs

    def g(self, v):
        A = self.P1 @ v
        B = self.P2 @ v
        return (0.5 * A * B - self.t * (self.inv @ v)) / self.ys

    def jac(self, v):
        A = self.P1 @ v
        B = self.P2 @ v
        J = 0.5 * (self.P1 * B[:, None] + A[:, None] * self.P2) - self.t[:, None] * self.inv[None, :]
        return J / self.ys[:, None]

    def kappa(self, v) -> float:
        return float(self.inv @ v)

    def cap_row(self):
        # L_1 <= cap  <=>  lambda_1 - cap * kappa <= 0
        if self.cfg.l1_cap is None or self.degs[0] != 1:
            return None
        row = -self.cfg.l1_cap * self.inv.copy()
        row[0] += 1.0
        return row

    def dist(self, v) -> DegreeDistribution:
        return _edge_dist(self.degs, v, Side.VARIABLE)

    def feasible(self, v) -> bool:
        lam = self.dist(v)
        if _certified(lam, self.rho, self.delta, self.cfg.grid) <= 0:
            return False
        if np.any(self.g(self.vector(lam)) > 0):
            return False
        row = self.cap_row()
        if row is not None and float(row @ v) > 0:
            return False
        return True

    def vector(self, lam: DegreeDistribution) -> np.ndarray | None:
        lam = as_edge(lam)
        if any(d < self.cfg.l_min or d > self.cfg.l_max for d in lam.coefficients):
            return None
        return np.array([lam.get(int(d)) for d in self.degs])


def _trust_bounds(v, tr):
    return [(max(0.0, a - tr), min(1.0, a + tr)) for a in v]


def _phase1(prob: _VnProblem, v: np.ndarray, iters: int):
    """Minimize the largest scaled violation.  Returns (v, status)."""
    tr = 0.25
    nd = v.size
    cap = prob.cap_row()
    best = float(prob.g(v).max())
    for _ in range(iters):
        if prob.feasible(v):
            return v, "feasible"
        gv, J = prob.g(v), prob.jac(v)
        A_ub = np.hstack([J, -np.ones((J.shape[0], 1))])
        b_ub = J @ v - gv
        if cap is not None:
            A_ub = np.vstack([A_ub, np.append(cap, -1.0)])
            b_ub = np.append(b_ub, 0.0)
        c = np.zeros(nd + 1)
        c[-1] = 1.0
        res = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=np.append(np.ones(nd), 0.0)[None, :],
            b_eq=[1.0],
            bounds=_trust_bounds(v, tr) + [(-10.0, None)],
        )
        if res.ok:
            cand = np.clip(res.x[:nd], 0.0, None)
            cand /= cand.sum()
            val = float(prob.g(cand).max())
            if val < best - 1e-15:
                v, best = cand, val
                tr = min(2 * tr, 0.5)
                continue
        tr *= 0.5
        if tr < 1e-7:
            return v, "converged"
    return v, "budget"


def _phase2(prob: _VnProblem, v: np.ndarray, iters: int) -> np.ndarray:
    tr = 0.05
    nd = v.size
    cap = prob.cap_row()
    k0 = prob.kappa(v)
    for _ in range(iters):
        gv, J = prob.g(v), prob.jac(v)
        A_ub, b_ub = J, J @ v - gv - STRICT_EPS
        if cap is not None:
            A_ub = np.vstack([A_ub, cap])
            b_ub = np.append(b_ub, 0.0)
        res = linprog(
            -prob.inv,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=np.ones((1, nd)),
            b_eq=[1.0],
            bounds=_trust_bounds(v, tr),
        )
        if res.ok:
            cand = np.clip(res.x, 0.0, None)
            cand /= cand.sum()
            k1 = prob.kappa(cand)
            if k1 > k0 + 1e-13 and prob.feasible(cand):
                v, k0 = cand, k1
                tr = min(1.5 * tr, 0.25)
                continue
        tr *= 0.5
        if tr < 1e-7:
            break
    return v


def optimize_vn(
    cn: DegreeDistribution,
    cfg: OptimizerConfig,
    init: DegreeDistribution | None = None,
) -> DegreeDistribution:
    """Edge-perspective lambda of large kappa (hence large rate) with rho fixed.

    The result is a certified feasible point, not a proven global optimum.
    Raises Infeasible when no start can be driven to feasibility and Stalled
    when the feasibility search runs out of budget while still improving.
    """
    delta = cfg.effective_delta
    if delta >= 1.0:
        raise Infeasible("delta >= 1 leaves no room for contraction")
    ys = grid_points(cfg.grid)
    dense = _dense_points(cfg.grid)
    rho = as_edge(cn)
    lam = _vn_search(_VnProblem(cn, cfg, ys), cfg, init)
    # re-solve with cuts wherever the margin dips between grid points
    for _ in range(cfg.refine_rounds):
        cuts = _margin_cuts(lam, rho, delta, dense)
        if cuts.size == 0:
            break
        ys = np.union1d(ys, cuts)
        lam = _vn_search(_VnProblem(cn, cfg, ys), cfg, lam)
    return lam


def _vn_search(prob: _VnProblem, cfg: OptimizerConfig, init: DegreeDistribution | None) -> DegreeDistribution:
    nd = prob.degs.size
    rng = np.random.default_rng(cfg.seed)

    starts: list[np.ndarray] = []
    if init is not None:
        v0 = prob.vector(init)
        if v0 is not None:
            starts.append(v0)
    for k in range(nd):
        e = np.zeros(nd)
        e[k] = 1.0
        starts.append(e)
    starts.extend(rng.dirichlet(np.ones(nd)) for _ in range(cfg.restarts))

    feasible_starts = [v for v in starts if prob.feasible(v)]
    if not feasible_starts:
        statuses = []
        for v in starts[: 1 + cfg.restarts]:
            v1, status = _phase1(prob, v, cfg.slp_iters)
            statuses.append(status)
            if status == "feasible":
                feasible_starts.append(v1)
                break
        if not feasible_starts:
            if "budget" in statuses:
                raise Stalled("feasibility search exhausted its iteration budget")
            raise Infeasible(f"no feasible lambda at delta={prob.delta:g}")

    # best feasible starts by kappa, then a few diverse random ones
    feasible_starts.sort(key=prob.kappa, reverse=True)
    chosen = feasible_starts[: 1 + cfg.restarts]
    best = max((_phase2(prob, v, cfg.slp_iters) for v in chosen), key=prob.kappa)
    return prob.dist(best)


# -- alternation ------------------------------------------------------------


@dataclass
class AuditRow:
    round: int
    rate: float
    margin: float
    accepted: bool
    note: str = ""


@dataclass
class OptimizationResult:
    spec: EnsembleSpec
    audit: list[AuditRow] = field(default_factory=list)

    def write_audit(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("round,rate,margin,accepted,note\n")
            for r in self.audit:
                fh.write(f"{r.round},{r.rate!r},{r.margin!r},{int(r.accepted)},{r.note}\n")


def _spec_from_edges(lam: DegreeDistribution, rho: DegreeDistribution) -> EnsembleSpec:
    return EnsembleSpec(as_node(lam), as_node(rho))


def alternate(init: EnsembleSpec, cfg: OptimizerConfig) -> OptimizationResult:
    """Alternate CN and VN steps; rate never decreases across accepted rounds."""
    delta = cfg.effective_delta
    lam, rho = init.lam, init.rho
    margin0 = _certified(lam, rho, delta, cfg.grid)
    if margin0 <= 0:
        raise Infeasible(f"initial ensemble fails the DE margin at delta={delta:g}")
    best = init
    best_rate = init.design_rate
    audit = [AuditRow(0, best_rate, margin0, True, "init")]
    for rnd in range(1, cfg.max_rounds + 1):
        try:
            rho_new = optimize_cn(lam, cfg)
            lam_new = optimize_vn(rho_new, cfg, init=lam)
        except (Infeasible, Stalled) as exc:
            if rnd == 1 and isinstance(exc, Infeasible):
                raise
            audit.append(AuditRow(rnd, best_rate, float("nan"), False, type(exc).__name__))
            break
        spec = _spec_from_edges(lam_new, rho_new)
        margin = _certified(spec.lam, spec.rho, delta, cfg.grid)
        rate = design_rate(spec.vn_dist, spec.cn_dist)
        if margin <= 0 or rate < best_rate:
            audit.append(AuditRow(rnd, rate, margin, False, "rejected"))
            break
        audit.append(AuditRow(rnd, rate, margin, True))
        gain = rate - best_rate
        best, best_rate, lam, rho = spec, rate, spec.lam, spec.rho
        if gain < 1e-7:
            break
    return OptimizationResult(best, audit)
