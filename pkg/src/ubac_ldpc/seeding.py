"""Deterministic per-stream seeds derived from one master seed."""

from __future__ import annotations

import hashlib
from typing import Iterable

import numpy as np


class DuplicateLabel(ValueError):
    pass


def derive_seed(master: int, label: str) -> int:
    """64-bit seed from BLAKE2b over ``"<master>/<label>"``; platform independent."""
    digest = hashlib.blake2b(f"{int(master)}/{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def seed_split(master: int, labels: Iterable[str]) -> dict[str, int]:
    labels = list(labels)
    if len(set(labels)) != len(labels):
        seen = set()
        dup = next(x for x in labels if x in seen or seen.add(x))
        raise DuplicateLabel(f"label {dup!r} appears more than once")
    return {lab: derive_seed(master, lab) for lab in labels}


def rng_for(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label))
