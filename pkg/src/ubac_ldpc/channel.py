"""Noiseless two-user adder channel with frame offset and shared dither.

Indexing is 0-based.  User 1 occupies positions ``0..n-1`` and user 2 is
delayed by ``tau``, occupying ``tau..n+tau-1``.  Overlap positions are
``tau..n-1``; there the output couples user-1 symbol ``p`` with user-2 symbol
``p - tau``.  Bits map to BPSK as ``c = 2a - 1``.  The dither enters as the
sign ``s = 1 - 2 d~`` multiplying each symbol, so a dithered symbol equals the
BPSK image of the coset word ``a + d~`` and ``d~ = 0`` leaves the word unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LengthMismatch(ValueError):
    pass


class TauOutOfRange(ValueError):
    pass


class MalformedObservation(ValueError):
    pass


def bpsk(bits) -> np.ndarray:
    return 2 * np.asarray(bits, dtype=np.int8) - 1


def dither_sign(dither) -> np.ndarray:
    return 1 - 2 * np.asarray(dither, dtype=np.int8)


def check_tau(n: int, tau: int) -> None:
    if not 0 <= tau <= n:
        raise TauOutOfRange(f"tau={tau} outside [0, {n}]")


def transmit(c1, c2, tau: int, dither) -> np.ndarray:
    """``y_p = c1_p s_p + c2_{p-tau} s_{p-tau}`` with zeros outside the frames.

    ``c1``/``c2`` are +-1 words; ``dither`` is a binary word of the same length
    acting as the sign ``1 - 2 d~``.
    """
    c1 = np.asarray(c1, dtype=np.int8)
    c2 = np.asarray(c2, dtype=np.int8)
    d = dither_sign(dither)
    n = c1.size
    if c2.size != n or d.size != n:
        raise LengthMismatch("codewords and dither must have equal length")
    check_tau(n, tau)
    y = np.zeros(n + tau, dtype=np.int8)
    y[:n] += c1 * d
    y[tau:] += c2 * d
    return y


def overlap_positions(n: int, tau: int) -> np.ndarray:
    check_tau(n, tau)
    return np.arange(tau, n)


def sample_erasure_pattern(n: int, tau: int, seed) -> np.ndarray:
    """Overlap positions erased i.i.d. with probability 1/2 (sorted array)."""
    check_tau(n, tau)
    rng = np.random.default_rng(seed)
    pos = np.arange(tau, n)
    return pos[rng.random(pos.size) < 0.5]


def detect_tau(observation) -> int:
    y = np.asarray(observation)
    ones = int(np.count_nonzero(np.abs(y) == 1))
    if ones % 2:
        raise MalformedObservation(f"{ones} magnitude-1 symbols; expected an even count")
    return ones // 2


@dataclass(frozen=True)
class JointChannelInstance:
    n: int
    tau: int
    observation: np.ndarray
    dither: np.ndarray
    erased_overlap: np.ndarray

    def __post_init__(self):
        y = self.observation
        if y.size != self.n + self.tau or self.dither.size != self.n:
            raise LengthMismatch("observation must have length n + tau")
        mag = np.abs(y)
        boundary = np.r_[np.arange(self.tau), np.arange(self.n, self.n + self.tau)]
        overlap = np.arange(self.tau, self.n)
        if self.tau and np.any(mag[boundary] != 1):
            raise MalformedObservation("boundary symbols must have magnitude 1")
        if np.any((mag[overlap] != 0) & (mag[overlap] != 2)):
            raise MalformedObservation("overlap symbols must lie in {-2, 0, 2}")


def make_instance(a1, a2, tau: int, dither) -> JointChannelInstance:
    """Send two linear codewords ``a1``, ``a2`` under the shared dither."""
    y = transmit(bpsk(a1), bpsk(a2), tau, dither)
    n = len(a1)
    erased = np.flatnonzero(y == 0)
    return JointChannelInstance(n, tau, y, np.asarray(dither, dtype=np.uint8), erased)
