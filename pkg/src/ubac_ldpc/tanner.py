"""Tanner graphs from an LDPC(lambda, rho) ensemble, the shifted joint view,
short stopping sets made of degree-one VNs, and expurgation.

Graphs are stored as CSR over VNs: the CNs of VN ``i`` are
``vn_cn[vn_ptr[i]:vn_ptr[i + 1]]``.  Multi-edges are kept; for decoding only
edges of odd multiplicity matter, so those get their own cached CSR views.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import TauOutOfRange, check_tau
from .degree_model import EnsembleSpec
from .gf2 import Gf2Matrix
from .seeding import derive_seed

MAX_K = 8


class DegreeAssignmentOverflow(RuntimeError):
    pass


class ExpurgationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TannerGraph:
    n: int
    m: int
    vn_ptr: np.ndarray
    vn_cn: np.ndarray
    seed: int = 0
    permutation_applied: bool = True

    def __post_init__(self):
        if self.vn_ptr.size != self.n + 1 or self.vn_ptr[-1] != self.vn_cn.size:
            raise ValueError("malformed CSR arrays")
        if self.vn_cn.size and (self.vn_cn.min() < 0 or self.vn_cn.max() >= self.m):
            raise ValueError("CN index out of range")
        self.vn_ptr.setflags(write=False)
        self.vn_cn.setflags(write=False)

    @classmethod
    def from_adjacency(cls, adjacency, m: int, seed: int = 0, permutation_applied: bool = True) -> "TannerGraph":
        lists = [sorted(int(c) for c in cs) for cs in adjacency]
        ptr = np.zeros(len(lists) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(cs) for cs in lists])
        flat = np.array([c for cs in lists for c in cs], dtype=np.int64)
        return cls(len(lists), int(m), ptr, flat, seed, permutation_applied)

    @property
    def edge_count(self) -> int:
        return int(self.vn_cn.size)

    @cached_property
    def vn_degrees(self) -> np.ndarray:
        return np.diff(self.vn_ptr)

    @cached_property
    def cn_degrees(self) -> np.ndarray:
        return np.bincount(self.vn_cn, minlength=self.m)

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.vn_cn[self.vn_ptr[i]: self.vn_ptr[i + 1]] for i in range(self.n)]

    @cached_property
    def _odd_edges(self) -> tuple[np.ndarray, np.ndarray]:
        vn = np.repeat(np.arange(self.n), self.vn_degrees)
        key = vn * self.m + self.vn_cn
        uniq, counts = np.unique(key, return_counts=True)
        odd = uniq[counts % 2 == 1]
        return odd // self.m, odd % self.m

    @cached_property
    def odd_vn_csr(self) -> tuple[np.ndarray, np.ndarray]:
        vn, cn = self._odd_edges
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(np.bincount(vn, minlength=self.n))
        return ptr, cn.astype(np.int64)

    @cached_property
    def odd_cn_csr(self) -> tuple[np.ndarray, np.ndarray]:
        vn, cn = self._odd_edges
        order = np.lexsort((vn, cn))
        ptr = np.zeros(self.m + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(np.bincount(cn, minlength=self.m))
        return ptr, vn[order].astype(np.int64)

    def parity_check(self) -> Gf2Matrix:
        vn, cn = self._odd_edges
        dense = np.zeros((self.m, self.n), dtype=np.uint8)
        dense[cn, vn] = 1
        return Gf2Matrix.from_dense(dense)

    def achieved_rate(self) -> float:
        return 1.0 - self.m / self.n

    def degree_census(self) -> tuple[dict[int, int], dict[int, int]]:
        v = np.bincount(self.vn_degrees)
        c = np.bincount(self.cn_degrees)
        return ({int(d): int(k) for d, k in enumerate(v) if k}, {int(d): int(k) for d, k in enumerate(c) if k})

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m} {self.seed}"]
        for i, cs in enumerate(self.adjacency):
            lines.append(f"{i}: " + " ".join(str(int(c)) for c in cs) if cs.size else f"{i}:")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TannerGraph":
        rows = [ln for ln in text.splitlines() if ln.strip()]
        n, m, seed = (int(t) for t in rows[0].split())
        adj: list[list[int]] = [[] for _ in range(n)]
        for ln in rows[1:]:
            head, _, rest = ln.partition(":")
            adj[int(head)] = [int(t) for t in rest.split()]
        if len(rows) - 1 != n:
            raise ValueError(f"expected {n} VN lines, found {len(rows) - 1}")
        return cls.from_adjacency(adj, m, seed)


# -- sampling ----------------------------------------------------------------


def apportion(total: int, fractions: dict[int, float]) -> dict[int, int]:
    """Largest-remainder rounding of ``total * fraction`` to integers summing to ``total``."""
    degs = sorted(fractions)
    quotas = np.array([total * fractions[d] for d in degs])
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:short]] += 1
    return {d: int(c) for d, c in zip(degs, base)}


def _balance_sockets(target_sockets: int, counts: dict[int, int], quotas: dict[int, float]) -> dict[int, int]:
    """Move CNs between degree classes until their sockets match the VN side.

    Each move relabels one CN from degree ``a`` to ``b``.  Moves within the
    support are tried first, choosing the one that shrinks the imbalance most
    and then stays closest to the real-valued class targets.  If the support
    cannot close the gap, single-step moves to neighbouring degrees are used.
    """
    counts = dict(counts)
    for _ in range(10 * (target_sockets + 1)):
        gap = target_sockets - sum(d * c for d, c in counts.items())
        if gap == 0:
            return {d: c for d, c in counts.items() if c > 0}
        best = None
        for a, ca in counts.items():
            if ca == 0:
                continue
            for b in quotas:
                if b == a:
                    continue
                new_gap = gap - (b - a)
                if abs(new_gap) >= abs(gap):
                    continue
                dev = (ca - 1 - quotas.get(a, 0.0)) ** 2 + (counts.get(b, 0) + 1 - quotas[b]) ** 2
                dev -= (ca - quotas.get(a, 0.0)) ** 2 + (counts.get(b, 0) - quotas[b]) ** 2
                key = (abs(new_gap), dev, a, b)
                if best is None or key < best[0]:
                    best = (key, a, b)
        if best is None:
            step = 1 if gap > 0 else -1
            movable = [a for a, c in counts.items() if c > 0 and a + step >= 2]
            if not movable:
                raise DegreeAssignmentOverflow("cannot balance VN and CN sockets")
            a = max(movable, key=lambda d: counts[d])
            b = a + step
        else:
            _, a, b = best
        counts[a] -= 1
        counts[b] = counts.get(b, 0) + 1
    raise DegreeAssignmentOverflow("socket balancing did not terminate")


def degree_counts(spec: EnsembleSpec, n: int) -> tuple[dict[int, int], dict[int, int]]:
    vn_counts = apportion(n, spec.vn_dist.as_dict())
    m = int(round(n * spec.vn_dist.mean_degree() / spec.cn_dist.mean_degree()))
    if m < 1:
        raise DegreeAssignmentOverflow("ensemble yields no check nodes at this n")
    cn_frac = spec.cn_dist.as_dict()
    cn_counts = apportion(m, cn_frac)
    sockets = sum(d * c for d, c in vn_counts.items())
    cn_counts = _balance_sockets(sockets, cn_counts, {d: m * f for d, f in cn_frac.items()})
    return vn_counts, cn_counts


def sample_graph(spec: EnsembleSpec, n: int, seed: int) -> TannerGraph:
    """Configuration-model sample: uniform socket matching, then a uniform VN relabelling."""
    if n < 1:
        raise ValueError("n must be positive")
    vn_counts, cn_counts = degree_counts(spec, n)
    m = sum(cn_counts.values())
    rng = np.random.default_rng(seed)
    vn_deg = np.repeat(np.array(list(vn_counts), dtype=np.int64), list(vn_counts.values()))
    cn_deg = np.repeat(np.array(list(cn_counts), dtype=np.int64), list(cn_counts.values()))
    vn_sock = np.repeat(np.arange(n), vn_deg)
    cn_sock = np.repeat(np.arange(m), cn_deg)
    cn_of_edge = cn_sock[rng.permutation(cn_sock.size)]
    relabel = rng.permutation(n)
    vn_of_edge = relabel[vn_sock]
    order = np.lexsort((cn_of_edge, vn_of_edge))
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum(np.bincount(vn_of_edge, minlength=n))
    return TannerGraph(n, m, ptr, cn_of_edge[order].astype(np.int64), int(seed), True)


# -- joint view ----------------------------------------------------------------


@dataclass(frozen=True)
class JointView:
    """MAC topology for offset tau: MAC ``k`` joins user-1 VN ``mac_user1[k]`` and user-2 VN ``mac_user2[k]``."""

    n: int
    tau: int
    mac_user1: np.ndarray
    mac_user2: np.ndarray
    boundary_user1: np.ndarray
    boundary_user2: np.ndarray


def joint_view(graph: TannerGraph, tau: int) -> JointView:
    check_tau(graph.n, tau)
    n = graph.n
    return JointView(n, tau, np.arange(tau, n), np.arange(0, n - tau), np.arange(tau), np.arange(n - tau, n))


# -- degree-one stopping sets --------------------------------------------------


@dataclass(frozen=True)
class StoppingSetReport:
    tau: int
    vn_indices: frozenset
    size: int = field(init=False)
    K: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "size", len(self.vn_indices))
        object.__setattr__(self, "K", len(self.vn_indices) // 4)
        if self.size % 4:
            raise ValueError("a degree-one stopping set has a multiple of four VNs")


def degree_one_pairs(graph: TannerGraph, tau: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Overlap positions whose user-1 and user-2 VNs both have degree one, with their CNs."""
    deg1 = graph.vn_degrees == 1
    pos = np.arange(tau, graph.n)
    keep = deg1[pos] & deg1[pos - tau]
    pos = pos[keep]
    cn = graph.vn_cn[graph.vn_ptr[:-1]] if graph.n else np.zeros(0, dtype=np.int64)
    return pos, cn[pos], cn[pos - tau]


def _two_core(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Indices of pairs surviving repeated removal of pairs with a lonely endpoint."""
    alive = np.ones(a.size, dtype=bool)
    while True:
        ca = np.bincount(a[alive], minlength=int(a.max()) + 1 if a.size else 0)
        cb = np.bincount(b[alive], minlength=int(b.max()) + 1 if b.size else 0)
        drop = alive & ((ca[a] < 2) | (cb[b] < 2))
        if not drop.any():
            return np.flatnonzero(alive)
        alive &= ~drop


def _cycles(a: np.ndarray, b: np.ndarray, max_pairs: int, first_only: bool) -> list[tuple[int, ...]]:
    """Simple cycles of at most ``max_pairs`` pairs in the CN multigraph.

    Each pair is an edge between its user-1 CN ``a`` and user-2 CN ``b``.  A
    cycle is reported once, rooted at its smallest pair and traversed from the
    user-2 end of that pair back to its user-1 end.
    """
    by_a: dict[int, list[int]] = {}
    by_b: dict[int, list[int]] = {}
    for e, (x, y) in enumerate(zip(a.tolist(), b.tolist())):
        by_a.setdefault(x, []).append(e)
        by_b.setdefault(y, []).append(e)
    found: list[tuple[int, ...]] = []
    for e0 in range(a.size):
        goal = int(a[e0])
        # state: (at user-2 side?, vertex, path of pairs, visited vertices)
        stack = [(True, int(b[e0]), (e0,), frozenset({("a", goal), ("b", int(b[e0]))}))]
        while stack:
            on_b, v, path, seen = stack.pop()
            edges = by_b[v] if on_b else by_a[v]
            for e in edges:
                if e <= e0 or e in path:
                    continue
                w = int(a[e]) if on_b else int(b[e])
                if on_b and w == goal:
                    found.append(tuple(sorted(path + (e,))))
                    if first_only:
                        return found
                    continue
                if len(path) + 1 >= max_pairs:
                    continue
                key = ("a", w) if on_b else ("b", w)
                if key in seen:
                    continue
                stack.append((not on_b, w, path + (e,), seen | {key}))
    return found


def find_deg1_stopping_sets(
    graph: TannerGraph,
    tau_max: int,
    K_max: int,
    *,
    first_only: bool = False,
    tau_min: int = 1,
) -> list[StoppingSetReport]:
    """All minimal stopping sets of at most ``4 K_max`` degree-one VNs, for tau in [tau_min, tau_max].

    Every member pair is an overlap position whose two VNs have degree one; the
    set stalls peeling exactly when each CN it touches (per user) is touched
    at least twice, and the minimal such sets are the cycles found here.
    """
    if K_max < 1 or tau_max < 1:
        raise ValueError("need K_max >= 1 and tau_max >= 1")
    if K_max > MAX_K:
        raise ValueError(f"K_max is limited to {MAX_K}")
    if tau_max > graph.n:
        raise TauOutOfRange(f"tau_max={tau_max} exceeds n={graph.n}")
    reports: list[StoppingSetReport] = []
    for tau in range(tau_min, tau_max + 1):
        pos, a, b = degree_one_pairs(graph, tau)
        core = _two_core(a, b)
        if core.size == 0:
            continue
        pos, a, b = pos[core], a[core], b[core]
        seen = set()
        for cyc in _cycles(a, b, 2 * K_max, first_only):
            members = frozenset((1, int(pos[e])) for e in cyc) | frozenset((2, int(pos[e]) - tau) for e in cyc)
            if members in seen:
                continue
            seen.add(members)
            reports.append(StoppingSetReport(tau, members))
            if first_only:
                return reports
    return reports


def error_floor_bound(L1: float, R: float, tau_max: int, K: int) -> float:
    """Lower bound on the probability that a sampled graph has no degree-one
    stopping set of size <= 4K for any tau in [1, tau_max] (leading terms only).
    May be negative, in which case it is vacuous."""
    if not 0.0 <= L1 <= 1.0:
        raise ValueError("L1 must lie in [0, 1]")
    if not 0.0 < R < 1.0:
        raise ValueError("R must lie in (0, 1)")
    base = L1 * L1 / (1.0 - R)
    return 1.0 - tau_max / 2.0 * sum(base**k / (2 * k) for k in range(1, K + 1))


def expected_4ss_count(L1: float, R: float, tau_max: int) -> float:
    """Leading-order mean number of size-4 degree-one stopping sets over tau in [1, tau_max]."""
    return tau_max * L1**4 / (2.0 * (1.0 - R) ** 2)


def expurgate(
    spec: EnsembleSpec,
    n: int,
    tau_max: int,
    K_max: int,
    max_resamples: int,
    seed: int,
) -> tuple[TannerGraph, int]:
    """Resample until no degree-one stopping set of size <= 4 K_max exists.

    Returns the graph and the number of resamples spent (0 when the first draw
    is clean).  Draw ``a`` uses the seed derived from ``(seed, "expurgate/a")``.
    """
    bound = error_floor_bound(spec.L1, spec.design_rate, tau_max, K_max)
    if bound <= 0:
        raise ValueError(f"clean-graph probability bound {bound:.3g} is not positive; expurgation would not terminate")
    if max_resamples < 0:
        raise ValueError("max_resamples must be >= 0")
    for attempt in range(max_resamples + 1):
        g = sample_graph(spec, n, derive_seed(seed, f"expurgate/{attempt}"))
        if spec.L1 == 0 or not find_deg1_stopping_sets(g, tau_max, K_max, first_only=True):
            return g, attempt
    raise ExpurgationBudgetExceeded(f"no clean graph within {max_resamples} resamples")


