"""Density evolution for the joint two-user erasure graph.

Four erasure probabilities are tracked per iteration: VN->CN (x), CN->VN (y),
VN->MAC (w) and MAC->VN (z).  The MAC node sees an erased channel symbol with
probability 1/2, which is where the single factor 1/2 enters.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .degree_model import DegreeDistribution, as_edge, as_node, eval_poly

DEFAULT_TARGET = 1e-8
DEFAULT_GRID = 256


@dataclass(frozen=True)
class DEState:
    x: float
    y: float
    w: float
    z: float
    iteration: int = 0

    def __post_init__(self):
        for name in ("x", "y", "w", "z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


INITIAL_STATE = DEState(x=1.0, y=1.0, w=1.0, z=0.5, iteration=0)


@dataclass
class DETrajectory:
    states: list[DEState]
    p: list[float]
    converged: bool
    iterations_to_target: int | None

    @property
    def x(self) -> np.ndarray:
        return np.array([s.x for s in self.states])

    @property
    def y(self) -> np.ndarray:
        return np.array([s.y for s in self.states])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "x", "y", "w", "z", "p"])
            for s, p in zip(self.states, self.p):
                wr.writerow([s.iteration, repr(s.x), repr(s.y), repr(s.w), repr(s.z), repr(p)])


class _Polys:
    """L, lambda and rho of one ensemble, evaluated with clipping to [0, 1]."""

    def __init__(self, vn: DegreeDistribution, cn: DegreeDistribution):
        self.Ln = as_node(vn)
        self.lam = as_edge(vn)
        self.rho = as_edge(cn)

    @staticmethod
    def _clip(v):
        return np.clip(v, 0.0, 1.0)

    def L(self, v):
        return eval_poly(self.Ln, self._clip(v))

    def lam_(self, v):
        return eval_poly(self.lam, self._clip(v))

    def rho_(self, v):
        return eval_poly(self.rho, self._clip(v))

    def check_update(self, y):
        """y -> 1 - rho(1 - L(y) lambda(y) / 2): one full iteration on y."""
        return 1.0 - self.rho_(1.0 - 0.5 * self.L(y) * self.lam_(y))

    def scalar_update(self, x):
        y = 1.0 - self.rho_(1.0 - x)
        return 0.5 * self.L(y) * self.lam_(y)


def de_step(state: DEState, vn: DegreeDistribution, cn: DegreeDistribution, _polys: _Polys | None = None) -> DEState:
    P = _polys or _Polys(vn, cn)
    x = state.z * P.lam_(state.y)
    y = 1.0 - P.rho_(1.0 - x)
    w = P.L(y)
    z = 0.5 * w
    return DEState(float(np.clip(x, 0, 1)), float(np.clip(y, 0, 1)), float(np.clip(w, 0, 1)),
                   float(np.clip(z, 0, 1)), state.iteration + 1)


def de_scalar_step(x: float, vn: DegreeDistribution, cn: DegreeDistribution) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    return float(_Polys(vn, cn).scalar_update(x))


def de_run(
    vn: DegreeDistribution,
    cn: DegreeDistribution,
    max_iters: int = 2000,
    target: float = DEFAULT_TARGET,
) -> DETrajectory:
    """Iterate from (x, y, z) = (1, 1, 1/2) until p_l <= target or max_iters.

    p_0 = 1/2 is the channel erasure probability; afterwards
    p_{l+1} = z_l * L(y_{l+1}).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 0.0 <= target <= 1.0:
        raise ValueError("target must lie in [0, 1]")
    P = _Polys(vn, cn)
    state = INITIAL_STATE
    states = [state]
    ps = [0.5]
    hit = None if ps[0] > target else 0
    while hit is None and state.iteration < max_iters:
        nxt = de_step(state, vn, cn, P)
        p = float(np.clip(state.z * P.L(nxt.y), 0.0, 1.0))
        state = nxt
        states.append(state)
        ps.append(p)
        if p <= target:
            hit = state.iteration
    return DETrajectory(states, ps, hit is not None, hit)


def margin_curve(
    vn: DegreeDistribution,
    cn: DegreeDistribution,
    grid: int = DEFAULT_GRID,
) -> tuple[np.ndarray, np.ndarray]:
    """Relative contraction margin (y - F(y)) / y on the open-interval grid.

    F is one full DE iteration acting on y; the numerator equals
    f_rho(y) = y - 1 + sum_i rho_i (1 - L(y) lambda(y) / 2)^(i-1).
    """
    ys = grid_points(grid)
    P = _Polys(vn, cn)
    return ys, (ys - P.check_update(ys)) / ys


def grid_points(grid: int) -> np.ndarray:
    if grid < 1:
        raise ValueError("grid must be positive")
    return np.arange(1, grid + 1, dtype=np.float64) / (grid + 1)


def feasibility_margin(
    vn: DegreeDistribution,
    cn: DegreeDistribution,
    delta: float = 0.0,
    grid: int = DEFAULT_GRID,
) -> tuple[float, float]:
    """Smallest relative margin minus ``delta`` over the grid, and where it sits.

    A positive value certifies F(y) <= (1 - delta) y at every grid point,
    i.e. DE keeps contracting by a factor (1 - delta) per iteration.
    """
    if grid < 10:
        raise ValueError("grid must be >= 10")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    ys, m = margin_curve(vn, cn, grid)
    k = int(np.argmin(m))
    return float(m[k] - delta), float(ys[k])


def scalar_iterates(vn: DegreeDistribution, cn: DegreeDistribution, count: int, x0: float = 1.0) -> np.ndarray:
    P = _Polys(vn, cn)
    out = [x0]
    for _ in range(count):
        out.append(float(P.scalar_update(out[-1])))
    return np.array(out)
