"""Bit-packed dense GF(2) matrices and the random-linear-code decoding experiment.

Rows are packed little-endian into uint64 words: column ``j`` lives in word
``j >> 6`` at bit ``j & 63``.  Row operations are whole-word XORs.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import bpsk, check_tau, transmit
from .seeding import derive_seed

_ONE = np.uint64(1)


class DimensionMismatch(ValueError):
    pass


class InconsistentObservation(ValueError):
    pass


class RankDeficient(ValueError):
    pass


def _words(cols: int) -> int:
    return max(1, (cols + 63) >> 6)


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, cols) 0/1 array into (rows, words) uint64."""
    bits = np.asarray(bits, dtype=np.uint8) & 1
    rows, cols = bits.shape
    w = _words(cols)
    padded = np.zeros((rows, w * 64), dtype=np.uint8)
    padded[:, :cols] = bits
    by = np.packbits(padded, axis=1, bitorder="little")
    return by.view(np.uint64).reshape(rows, w).copy()


def _unpack(data: np.ndarray, cols: int) -> np.ndarray:
    rows = data.shape[0]
    by = np.ascontiguousarray(data).view(np.uint8).reshape(rows, data.shape[1] * 8)
    return np.unpackbits(by, axis=1, bitorder="little")[:, :cols].copy()


def _col_bits(data: np.ndarray, j: int) -> np.ndarray:
    return (data[:, j >> 6] >> np.uint64(j & 63)) & _ONE


def _rref(data: np.ndarray, ncols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over the first ``ncols`` columns (in place on a copy)."""
    R = data.copy()
    rows = R.shape[0]
    pivots: list[int] = []
    r = 0
    for j in range(ncols):
        if r == rows:
            break
        col = _col_bits(R, j)
        cand = np.flatnonzero(col[r:]) + r
        if cand.size == 0:
            continue
        p = int(cand[0])
        if p != r:
            R[[r, p]] = R[[p, r]]
            col[[r, p]] = col[[p, r]]
        hit = np.flatnonzero(col)
        hit = hit[hit != r]
        if hit.size:
            R[hit] ^= R[r]
        pivots.append(j)
        r += 1
    return R, pivots


class SolveKind(str, Enum):
    UNIQUE = "unique"
    UNDERDETERMINED = "underdetermined"
    INCONSISTENT = "inconsistent"


@dataclass
class SolveResult:
    kind: SolveKind
    solution: np.ndarray | None
    nullspace: np.ndarray | None


class Gf2Matrix:
    """Dense binary matrix with packed rows."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: np.ndarray | None = None):
        self.rows = int(rows)
        self.cols = int(cols)
        if data is None:
            data = np.zeros((self.rows, _words(self.cols)), dtype=np.uint64)
        if data.shape != (self.rows, _words(self.cols)):
            raise DimensionMismatch("payload shape does not match dimensions")
        self.data = data

    @classmethod
    def from_dense(cls, bits) -> "Gf2Matrix":
        bits = np.atleast_2d(np.asarray(bits))
        return cls(bits.shape[0], bits.shape[1], _pack(bits))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "Gf2Matrix":
        return cls.from_dense(rng.integers(0, 2, size=(rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        return cls.from_dense(np.eye(n, dtype=np.uint8))

    def to_dense(self) -> np.ndarray:
        return _unpack(self.data, self.cols)

    def copy(self) -> "Gf2Matrix":
        return Gf2Matrix(self.rows, self.cols, self.data.copy())

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __eq__(self, other):
        return isinstance(other, Gf2Matrix) and self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Gf2Matrix({self.rows}x{self.cols})"

    def rank(self) -> int:
        return len(_rref(self.data, self.cols)[1])

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        if x.size != self.cols:
            raise DimensionMismatch(f"vector length {x.size} != cols {self.cols}")
        xp = _pack(x[None, :])[0]
        return (np.bitwise_count(self.data & xp).sum(axis=1) & 1).astype(np.uint8)

    def select_columns(self, idx) -> "Gf2Matrix":
        idx = np.asarray(idx, dtype=np.int64)
        return Gf2Matrix.from_dense(self.to_dense()[:, idx])

    def vstack(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if other.cols != self.cols:
            raise DimensionMismatch("column counts differ")
        return Gf2Matrix(self.rows + other.rows, self.cols, np.vstack([self.data, other.data]))

    def nullspace(self) -> np.ndarray:
        """Basis of the right kernel as rows of a (cols - rank, cols) 0/1 array."""
        R, piv = _rref(self.data, self.cols)
        dense = _unpack(R[: len(piv)], self.cols)
        free = [j for j in range(self.cols) if j not in set(piv)]
        basis = np.zeros((len(free), self.cols), dtype=np.uint8)
        for k, f in enumerate(free):
            basis[k, f] = 1
            basis[k, piv] = dense[:, f]
        return basis

    def solve(self, b) -> SolveResult:
        """Classify and solve ``M x = b``.

        Returns one particular solution plus a kernel basis when the system is
        underdetermined, the solution alone when it is unique.
        """
        b = np.asarray(b, dtype=np.uint8) & 1
        if b.size != self.rows:
            raise DimensionMismatch(f"rhs length {b.size} != rows {self.rows}")
        aug = np.hstack([self.to_dense(), b[:, None]])
        R, piv = _rref(_pack(aug), self.cols)
        rhs = _col_bits(R, self.cols).astype(np.uint8)
        if np.any(rhs[len(piv):]):
            return SolveResult(SolveKind.INCONSISTENT, None, None)
        x = np.zeros(self.cols, dtype=np.uint8)
        x[piv] = rhs[: len(piv)]
        if len(piv) == self.cols:
            return SolveResult(SolveKind.UNIQUE, x, None)
        return SolveResult(SolveKind.UNDERDETERMINED, x, self.nullspace())


def rank(M: Gf2Matrix) -> int:
    return M.rank()


def solve(M: Gf2Matrix, b) -> SolveResult:
    return M.solve(b)


# -- random linear codes over the adder channel -----------------------------


class RlcStatus(str, Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"


@dataclass
class RlcDecodeResult:
    status: RlcStatus
    m1: np.ndarray | None
    m2: np.ndarray | None
    erased: np.ndarray
    stacked_rank: int


def stacked_erasure_matrix(H: Gf2Matrix, tau: int, erased) -> Gf2Matrix:
    """``[H_E; H_{E - tau}]`` acting on the unknown user-1 bits at E."""
    erased = np.asarray(erased, dtype=np.int64)
    dense = H.to_dense()
    return Gf2Matrix.from_dense(np.vstack([dense[:, erased], dense[:, erased - tau]]))


def rlc_decode(H: Gf2Matrix, tau: int, observation) -> RlcDecodeResult:
    """Recover both codewords of ``ker H`` from the undithered adder output.

    Unknowns are the user-1 bits on the erased set E; each one fixes its
    user-2 partner by ``m2_{p - tau} = m1_p + 1``.  Both parity systems are
    stacked into one system over those unknowns.
    """
    n = H.cols
    check_tau(n, tau)
    y = np.asarray(observation, dtype=np.int64)
    if y.size != n + tau:
        raise DimensionMismatch(f"observation length {y.size} != n + tau = {n + tau}")
    m1 = np.zeros(n, dtype=np.uint8)
    m2 = np.zeros(n, dtype=np.uint8)
    head, tail, ov = y[:tau], y[n:], y[tau:n]
    if np.any(np.abs(head) != 1) or np.any(np.abs(tail) != 1) or np.any(~np.isin(ov, (-2, 0, 2))):
        raise InconsistentObservation("symbols do not fit the adder channel")
    m1[:tau] = head > 0
    m2[n - tau:] = tail > 0
    known = ov != 0
    pos = np.arange(tau, n)
    m1[pos[known]] = ov[known] > 0
    m2[pos[known] - tau] = ov[known] > 0
    E = pos[~known]

    dense = H.to_dense()
    if E.size == 0:
        if np.any(H.matvec(m1)) or np.any(H.matvec(m2)):
            raise InconsistentObservation("pinned words violate parity")
        return RlcDecodeResult(RlcStatus.UNIQUE, m1, m2, E, 0)

    s1 = H.matvec(m1)  # m1 is zero on E, so this is H_{not E} m1
    s2 = H.matvec(m2)
    # user-2 unknowns are m1_E + 1, so move H_{E - tau} 1 to the right-hand side
    s2_tilde = s2 ^ (dense[:, E - tau].sum(axis=1) & 1).astype(np.uint8)
    S = stacked_erasure_matrix(H, tau, E)
    res = S.solve(np.concatenate([s1, s2_tilde]))
    if res.kind is SolveKind.INCONSISTENT:
        raise InconsistentObservation("stacked parity system has no solution")
    rk = E.size if res.kind is SolveKind.UNIQUE else S.rank()
    if res.kind is SolveKind.UNDERDETERMINED:
        return RlcDecodeResult(RlcStatus.AMBIGUOUS, None, None, E, rk)
    m1[E] = res.solution
    m2[E - tau] = res.solution ^ 1
    return RlcDecodeResult(RlcStatus.UNIQUE, m1, m2, E, rk)


def rlc_error_bound(n: int, rate: float) -> float:
    """Union bound ``(n - 1)/2 * 2^{n (2R - 3/2)}`` on the joint decoding error."""
    return (n - 1) / 2 * 2.0 ** (n * (2 * rate - 1.5))


def random_codeword(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if basis.shape[0] == 0:
        return np.zeros(basis.shape[1], dtype=np.uint8)
    coef = rng.integers(0, 2, size=basis.shape[0], dtype=np.uint8)
    return ((coef @ basis) & 1).astype(np.uint8)


@dataclass
class RlcExperimentResult:
    n: int
    rate: float
    k: int
    tau: int
    trials: int
    errors: int
    empirical_pe: float
    bound: float
    rank_condition_violations: int
    mean_erased: float

    @property
    def sigma(self) -> float:
        p = self.empirical_pe
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)


MAX_RLC_N = 512


def rlc_experiment(n: int, rate: float, tau: int, trials: int, seed: int) -> RlcExperimentResult:
    """Monte-Carlo joint decoding error of Bernoulli(1/2) parity-check codes.

    ``k = round(n R)`` and ``r = n - k``; each trial draws a fresh H and two
    independent uniform codewords of ``ker H``.  A trial fails when decoding is
    ambiguous or returns the wrong pair.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 1 <= n <= MAX_RLC_N:
        raise ValueError(f"n must lie in [1, {MAX_RLC_N}]")
    if not 0 < rate < 1:
        raise ValueError("rate must lie in (0, 1)")
    check_tau(n, tau)
    k = int(round(n * rate))
    r = n - k
    errors = 0
    violations = 0
    erased_total = 0
    zeros = np.zeros(n, dtype=np.uint8)
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, f"rlc/{t}"))
        H = Gf2Matrix.random(r, n, rng)
        basis = H.nullspace()
        m1 = random_codeword(basis, rng)
        m2 = random_codeword(basis, rng)
        y = transmit(bpsk(m1), bpsk(m2), tau, zeros)
        res = rlc_decode(H, tau, y)
        erased_total += res.erased.size
        ok = res.status is RlcStatus.UNIQUE and np.array_equal(res.m1, m1) and np.array_equal(res.m2, m2)
        errors += not ok
        full_rank = res.stacked_rank == res.erased.size
        violations += full_rank != ok
    return RlcExperimentResult(
        n, rate, k, tau, trials, errors, errors / trials, rlc_error_bound(n, rate),
        violations, erased_total / trials,
    )


def rank_product_bound(d: int, r: int) -> float:
    """``prod_{k=1}^{d} (1 - 2^{k+1} / 2^{2r})``, clipped at zero."""
    out = 1.0
    for k in range(1, d + 1):
        out *= max(0.0, 1.0 - 2.0 ** (k + 1 - 2 * r))
    return out


def full_rank_frequency(n: int, r: int, tau: int, d: int, trials: int, seed: int) -> float:
    """Fraction of draws where ``[H_E; H_{E - tau}]`` has full column rank ``d``.

    H is Bernoulli(1/2) of size ``r x n`` and E is a uniform d-subset of the
    overlap positions.
    """
    check_tau(n, tau)
    if d > n - tau:
        raise ValueError("d exceeds the number of overlap positions")
    hits = 0
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, f"rank/{t}"))
        H = Gf2Matrix.random(r, n, rng)
        E = np.sort(rng.choice(np.arange(tau, n), size=d, replace=False))
        hits += stacked_erasure_matrix(H, tau, E).rank() == d
    return hits / trials


# -- coset LDPC encoding ------------------------------------------------------

_GENERATORS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def generator_basis(graph) -> np.ndarray:
    """Kernel basis of the graph's parity-check matrix, cached per graph object."""
    basis = _GENERATORS.get(graph)
    if basis is None:
        basis = graph.parity_check().nullspace()
        _GENERATORS[graph] = basis
    return basis


def ldpc_encode(graph, dither, info_bits) -> np.ndarray:
    """``m = G b + d~``: a member of the coset selected by the dither."""
    G = generator_basis(graph)
    b = np.asarray(info_bits, dtype=np.uint8) & 1
    d = np.asarray(dither, dtype=np.uint8) & 1
    if d.size != graph.n:
        raise DimensionMismatch("dither length must equal n")
    if b.size > G.shape[0]:
        raise RankDeficient(f"code dimension {G.shape[0]} < info length {b.size}")
    lin = ((b @ G[: b.size]) & 1).astype(np.uint8) if b.size else np.zeros(graph.n, dtype=np.uint8)
    return lin ^ d
