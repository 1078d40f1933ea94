"""Joint two-user peeling decoder over the shifted Tanner graph.

The joint graph has ``2n`` VNs (user 1 first, then user 2) and two copies of
the CNs.  One iteration is a flooding CN step on both copies followed by one
MAC exchange: every VN resolved in the CN step hands its value to its MAC
partner at an erased overlap position.  The decoder recovers the linear
codewords ``a1``, ``a2``; the dither only enters through the observation map
and the MAC relation ``a2 = a1 + 1 + d~_p + d~_{p - tau}``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numba
import numpy as np

from .channel import check_tau, dither_sign
from .tanner import TannerGraph

ERASED = -1
DEFAULT_MAX_ITERS = 200


class ObservationInconsistent(ValueError):
    pass


@dataclass
class DecodeResult:
    user1_values: np.ndarray
    user2_values: np.ndarray
    iterations_used: int
    erased_fraction_per_iter: np.ndarray
    success: bool
    updates: int = 0

    def erased_mask(self) -> np.ndarray:
        return np.concatenate([self.user1_values, self.user2_values]) == ERASED

    @property
    def residual_erasures(self) -> int:
        return int(self.erased_mask().sum())

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iter,erased_fraction\n")
            for i, f in enumerate(self.erased_fraction_per_iter):
                fh.write(f"{i},{f!r}\n")


@numba.njit(cache=True)
def _peel(vn_ptr, vn_cn, n, m, known, val, partner, mconst, max_iters, track):
    nv = 2 * n
    cnt = np.zeros(2 * m, np.int64)
    acc = np.zeros(2 * m, np.uint8)
    idx = np.zeros(2 * m, np.int64)
    erased = 0
    for g in range(nv):
        u = g // n
        v = g - u * n
        if not known[g]:
            erased += 1
        for e in range(vn_ptr[v], vn_ptr[v + 1]):
            c = u * m + vn_cn[e]
            if known[g]:
                acc[c] ^= val[g]
            else:
                cnt[c] += 1
                idx[c] ^= g
    trace = np.empty(max_iters + 2, np.float64)
    trace[0] = erased / nv
    ntrace = 1
    cand_vn = np.empty(2 * m, np.int64)
    cand_val = np.empty(2 * m, np.uint8)
    fresh = np.empty(nv, np.int64)
    updates = 0
    conflict = False
    iters = 0
    while iters < max_iters and erased > 0:
        nc = 0
        for c in range(2 * m):
            if cnt[c] == 1:
                cand_vn[nc] = idx[c]
                cand_val[nc] = acc[c]
                nc += 1
        if nc == 0:
            break
        nf = 0
        for k in range(nc):
            g = cand_vn[k]
            if known[g]:
                if track and val[g] != cand_val[k]:
                    conflict = True
                continue
            known[g] = 1
            val[g] = cand_val[k]
            fresh[nf] = g
            nf += 1
            erased -= 1
            u = g // n
            v = g - u * n
            for e in range(vn_ptr[v], vn_ptr[v + 1]):
                c = u * m + vn_cn[e]
                cnt[c] -= 1
                acc[c] ^= val[g]
                idx[c] ^= g
                updates += 1
        trace[ntrace] = erased / nv
        ntrace += 1
        for k in range(nf):
            g = fresh[k]
            q = partner[g]
            if q < 0:
                continue
            want = val[g] ^ mconst[g]
            if known[q]:
                if track and val[q] != want:
                    conflict = True
                continue
            known[q] = 1
            val[q] = want
            erased -= 1
            updates += 1
            u = q // n
            v = q - u * n
            for e in range(vn_ptr[v], vn_ptr[v + 1]):
                c = u * m + vn_cn[e]
                cnt[c] -= 1
                acc[c] ^= val[q]
                idx[c] ^= q
                updates += 1
        iters += 1
    if trace[ntrace - 1] != erased / nv:
        trace[ntrace] = erased / nv
        ntrace += 1
    if track:
        for c in range(2 * m):
            if cnt[c] == 0 and acc[c] != 0:
                conflict = True
    return iters, trace[:ntrace].copy(), updates, conflict


def _mac_arrays(n: int, tau: int, erased_pos: np.ndarray, dither: np.ndarray | None):
    partner = np.full(2 * n, -1, dtype=np.int64)
    mconst = np.zeros(2 * n, dtype=np.uint8)
    p = np.asarray(erased_pos, dtype=np.int64)
    q = n + p - tau
    partner[p] = q
    partner[q] = p
    if dither is not None:
        k = (1 ^ dither[p] ^ dither[p - tau]).astype(np.uint8)
        mconst[p] = k
        mconst[q] = k
    else:
        mconst[p] = 1
        mconst[q] = 1
    return partner, mconst


def _run(graph: TannerGraph, known, val, partner, mconst, max_iters: int, track: bool) -> DecodeResult:
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    vn_ptr, vn_cn = graph.odd_vn_csr
    iters, trace, updates, conflict = _peel(
        vn_ptr, vn_cn, graph.n, graph.m, known, val, partner, mconst, max_iters, track
    )
    if conflict:
        raise ObservationInconsistent("observation violates a parity or MAC constraint")
    out = np.where(known.astype(bool), val.astype(np.int8), np.int8(ERASED))
    n = graph.n
    return DecodeResult(out[:n], out[n:], int(iters), trace, bool(known.all()), int(updates))


def _erased_overlap(n: int, tau: int, erased) -> np.ndarray:
    e = np.unique(np.asarray(sorted(erased) if isinstance(erased, (set, frozenset)) else erased, dtype=np.int64))
    if e.size and (e.min() < tau or e.max() >= n):
        raise ValueError(f"erased positions must lie in [{tau}, {n})")
    return e


def decode(graph: TannerGraph, tau: int, observation, dither, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
    """Decode both users' linear codewords from the adder-channel output."""
    n = graph.n
    check_tau(n, tau)
    y = np.asarray(observation, dtype=np.int64)
    d = np.asarray(dither, dtype=np.uint8) & 1
    if y.size != n + tau or d.size != n:
        raise ObservationInconsistent("observation must have length n + tau and dither length n")
    s = dither_sign(d).astype(np.int64)
    head, ov, tail = y[:tau], y[tau:n], y[n:]
    if np.any(np.abs(head) != 1) or np.any(np.abs(tail) != 1) or np.any(~np.isin(ov, (-2, 0, 2))):
        raise ObservationInconsistent("symbols do not fit the adder channel")
    known = np.zeros(2 * n, dtype=np.uint8)
    val = np.zeros(2 * n, dtype=np.uint8)
    # user-1 boundary, user-2 boundary, then pinned overlap pairs
    known[:tau] = 1
    val[:tau] = head * s[:tau] > 0
    j = np.arange(n - tau, n)
    known[n + j] = 1
    val[n + j] = tail * s[j] > 0
    pos = np.arange(tau, n)
    pin = ov != 0
    p = pos[pin]
    known[p] = 1
    val[p] = ov[pin] * s[p] > 0
    known[n + p - tau] = 1
    val[n + p - tau] = ov[pin] * s[p - tau] > 0
    partner, mconst = _mac_arrays(n, tau, pos[~pin], d)
    return _run(graph, known, val, partner, mconst, max_iters, True)


def decode_erasure_pattern(graph: TannerGraph, tau: int, erased, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
    """Value-free peeling: only erased/known status is tracked.

    Resolved VNs are reported as 0, which stands for "known".
    """
    n = graph.n
    check_tau(n, tau)
    e = _erased_overlap(n, tau, erased)
    known = np.ones(2 * n, dtype=np.uint8)
    known[e] = 0
    known[n + e - tau] = 0
    val = np.zeros(2 * n, dtype=np.uint8)
    partner, mconst = _mac_arrays(n, tau, e, None)
    return _run(graph, known, val, partner, mconst, max_iters, False)


def peel_sequential(graph: TannerGraph, tau: int, erased, seed: int = 0) -> np.ndarray:
    """Erasure-only peeling that fires one random resolvable constraint at a time.

    Returns the final erased mask over the ``2n`` joint VNs.  Slow; meant as an
    independent schedule for cross-checking the flooding decoder.
    """
    n, m = graph.n, graph.m
    e = _erased_overlap(n, tau, erased)
    rng = random.Random(seed)
    unknown = set(e.tolist()) | {n + int(p) - tau for p in e}
    partner = {}
    for p in e.tolist():
        partner[p] = n + p - tau
        partner[n + p - tau] = p
    ptr, cns = graph.odd_vn_csr
    cn_members: dict[int, set[int]] = {}
    for g in unknown:
        u, v = divmod(g, n)
        for c in cns[ptr[v]: ptr[v + 1]]:
            cn_members.setdefault(u * m + int(c), set()).add(g)

    def resolve(g):
        unknown.discard(g)
        u, v = divmod(g, n)
        for c in cns[ptr[v]: ptr[v + 1]]:
            cn_members[u * m + int(c)].discard(g)

    while True:
        moves = [("cn", c) for c, mem in cn_members.items() if len(mem) == 1]
        moves += [("mac", g) for g in unknown if partner.get(g) is not None and partner[g] not in unknown]
        if not moves:
            break
        kind, key = rng.choice(sorted(moves))
        resolve(next(iter(cn_members[key])) if kind == "cn" else key)
    mask = np.zeros(2 * n, dtype=bool)
    mask[list(unknown)] = True
    return mask
