"""Degree distributions for LDPC ensembles and the code-spec text format.

A distribution is stored sparsely as ``{degree: fraction}``.  Node-perspective
distributions describe fractions of nodes, edge-perspective ones fractions of
edges; ``L``/``R`` and ``lambda``/``rho`` in the usual notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np

STRICT_TOL = 1e-9
LENIENT_TOL = 2e-3


class Perspective(str, Enum):
    NODE = "node"
    EDGE = "edge"


class Side(str, Enum):
    VARIABLE = "variable"
    CHECK = "check"


class DegreeDistributionError(ValueError):
    pass


class NegativeFraction(DegreeDistributionError):
    pass


class SumNotOne(DegreeDistributionError):
    pass


class ZeroDegree(DegreeDistributionError):
    pass


class CheckDegreeOne(DegreeDistributionError):
    pass


class RateOutOfRange(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeDistribution:
    coefficients: Mapping[int, float]
    perspective: Perspective
    side: Side

    def __post_init__(self):
        items = sorted((int(k), float(v)) for k, v in dict(self.coefficients).items())
        object.__setattr__(self, "coefficients", MappingProxyType(dict(items)))

    @property
    def degrees(self) -> np.ndarray:
        return np.fromiter(self.coefficients.keys(), dtype=np.int64)

    @property
    def fractions(self) -> np.ndarray:
        return np.fromiter(self.coefficients.values(), dtype=np.float64)

    @property
    def max_degree(self) -> int:
        return max(self.coefficients)

    def get(self, degree: int) -> float:
        return self.coefficients.get(degree, 0.0)

    def mean_degree(self) -> float:
        """Average node degree, whatever perspective the coefficients are in."""
        d, f = self.degrees, self.fractions
        if self.perspective is Perspective.NODE:
            return float(np.dot(d, f))
        return float(1.0 / np.sum(f / d))

    def as_dict(self) -> dict[int, float]:
        return dict(self.coefficients)

    def __repr__(self):
        body = ", ".join(f"{k}: {v:.6g}" for k, v in self.coefficients.items())
        return f"DegreeDistribution({{{body}}}, {self.perspective.value}, {self.side.value})"


def validate(
    raw: Mapping[int, float],
    perspective: Union[Perspective, str] = Perspective.NODE,
    side: Union[Side, str] = Side.VARIABLE,
    *,
    lenient: bool = False,
    allow_check_degree_one: bool = False,
) -> DegreeDistribution:
    """Check a raw ``{degree: fraction}`` map and wrap it.

    Strict mode rejects any sum deviating from one by more than 1e-9 and never
    rescales.  ``lenient=True`` is meant for 3-decimal tables: it accepts a
    deviation up to 2e-3 and then rescales explicitly so the stored
    distribution is exactly normalized.  Zero entries are dropped.
    """
    perspective = Perspective(perspective)
    side = Side(side)
    if not raw:
        raise DegreeDistributionError("empty degree distribution")
    coeffs: dict[int, float] = {}
    for deg, frac in raw.items():
        deg_i = int(deg)
        if deg_i != deg:
            raise DegreeDistributionError(f"non-integer degree {deg!r}")
        frac = float(frac)
        if not math.isfinite(frac):
            raise DegreeDistributionError(f"non-finite fraction at degree {deg_i}")
        if frac < 0:
            raise NegativeFraction(f"fraction {frac} at degree {deg_i}")
        if deg_i <= 0:
            if frac > 0 or deg_i < 0:
                raise ZeroDegree(f"degree {deg_i} is not allowed")
            continue
        if frac > 0:
            coeffs[deg_i] = coeffs.get(deg_i, 0.0) + frac
    total = sum(coeffs.values())
    tol = LENIENT_TOL if lenient else STRICT_TOL
    if abs(total - 1.0) > tol:
        raise SumNotOne(f"fractions sum to {total:.12g} (tolerance {tol:g})")
    if lenient:
        coeffs = {k: v / total for k, v in coeffs.items()}
    if side is Side.CHECK and 1 in coeffs and not allow_check_degree_one:
        raise CheckDegreeOne("check-node distribution has a degree-1 entry")
    return DegreeDistribution(coeffs, perspective, side)


def node_to_edge(dist: DegreeDistribution) -> DegreeDistribution:
    if dist.perspective is not Perspective.NODE:
        raise TypeError("expected a node-perspective distribution")
    d, f = dist.degrees, dist.fractions
    w = d * f
    w = w / w.sum()
    return DegreeDistribution(dict(zip(d.tolist(), w.tolist())), Perspective.EDGE, dist.side)


def edge_to_node(dist: DegreeDistribution) -> DegreeDistribution:
    if dist.perspective is not Perspective.EDGE:
        raise TypeError("expected an edge-perspective distribution")
    d, f = dist.degrees, dist.fractions
    w = f / d
    w = w / w.sum()
    return DegreeDistribution(dict(zip(d.tolist(), w.tolist())), Perspective.NODE, dist.side)


def as_node(dist: DegreeDistribution) -> DegreeDistribution:
    return dist if dist.perspective is Perspective.NODE else edge_to_node(dist)


def as_edge(dist: DegreeDistribution) -> DegreeDistribution:
    return dist if dist.perspective is Perspective.EDGE else node_to_edge(dist)


def design_rate(vn: DegreeDistribution, cn: DegreeDistribution) -> float:
    """1 - mean VN degree / mean CN degree."""
    rate = 1.0 - vn.mean_degree() / cn.mean_degree()
    if not 0.0 < rate < 1.0:
        raise RateOutOfRange(f"design rate {rate:.6g} outside (0, 1)")
    return rate


def eval_poly(dist: DegreeDistribution, x):
    """Evaluate the generating polynomial at ``x`` (scalar or array).

    Node perspective gives ``sum c_i x**i``; edge perspective gives
    ``sum c_i x**(i-1)``.
    """
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0.0) or np.any(xa > 1.0):
        raise DomainError("polynomial argument must lie in [0, 1]")
    shift = 0 if dist.perspective is Perspective.NODE else 1
    out = np.zeros_like(xa)
    for deg, frac in dist.coefficients.items():
        out = out + frac * xa ** (deg - shift)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class EnsembleSpec:
    """LDPC(lambda, rho) ensemble given by node-perspective VN and CN distributions."""

    vn_dist: DegreeDistribution
    cn_dist: DegreeDistribution
    design_rate: float = field(init=False)

    def __post_init__(self):
        vn = as_node(self.vn_dist)
        cn = as_node(self.cn_dist)
        if vn.side is not Side.VARIABLE or cn.side is not Side.CHECK:
            raise DegreeDistributionError("EnsembleSpec needs a variable-side and a check-side distribution")
        object.__setattr__(self, "vn_dist", vn)
        object.__setattr__(self, "cn_dist", cn)
        object.__setattr__(self, "design_rate", design_rate(vn, cn))

    @property
    def lam(self) -> DegreeDistribution:
        return node_to_edge(self.vn_dist)

    @property
    def rho(self) -> DegreeDistribution:
        return node_to_edge(self.cn_dist)

    @property
    def L1(self) -> float:
        return self.vn_dist.get(1)

    @classmethod
    def from_raw(cls, vn: Mapping[int, float], cn: Mapping[int, float], *, lenient: bool = False) -> "EnsembleSpec":
        return cls(
            validate(vn, Perspective.NODE, Side.VARIABLE, lenient=lenient),
            validate(cn, Perspective.NODE, Side.CHECK, lenient=lenient),
        )


# Reference ensembles; CN rows are read as node-perspective fractions.
REFERENCE_RAW: dict[str, tuple[dict[int, float], dict[int, float]]] = {
    "code1": ({1: 0.376, 2: 0.594, 5: 0.014, 6: 0.016}, {4: 0.586, 5: 0.188, 10: 0.227}),
    "code2": ({1: 0.560, 2: 0.371, 7: 0.061, 8: 0.008}, {4: 0.128, 5: 0.582, 10: 0.290}),
    "code3": ({1: 0.444, 2: 0.445, 8: 0.111}, {4: 0.323, 5: 0.489, 20: 0.188}),
}
REFERENCE_RATES = {"code1": 0.689, "code2": 0.716, "code3": 0.733}
# code3's quoted rate is not reproduced by either reading of the table.
RATE_MISMATCH = {"code3"}


def reference_code(name: str) -> EnsembleSpec:
    vn, cn = REFERENCE_RAW[name.lower()]
    return EnsembleSpec.from_raw(vn, cn, lenient=True)


def edge_reading_rate(vn_raw: Mapping[int, float], cn_raw: Mapping[int, float]) -> float:
    """Rate obtained if both tabulated rows are read as edge fractions."""
    s_v = sum(f / d for d, f in vn_raw.items()) / sum(vn_raw.values())
    s_c = sum(f / d for d, f in cn_raw.items()) / sum(cn_raw.values())
    return 1.0 - s_c / s_v


# -- code-spec text files -------------------------------------------------


@dataclass(frozen=True)
class CodeSpecFile:
    spec: EnsembleSpec
    n: int | None = None


def parse_codespec(text: str) -> CodeSpecFile:
    """Parse ``vn <deg> <frac>`` / ``cn <deg> <frac>`` / ``n <int>`` lines."""
    vn: dict[int, float] = {}
    cn: dict[int, float] = {}
    n = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0].lower()
        try:
            if key in ("vn", "cn") and len(parts) == 3:
                target = vn if key == "vn" else cn
                deg = int(parts[1])
                target[deg] = target.get(deg, 0.0) + float(parts[2])
            elif key == "n" and len(parts) == 2:
                n = int(parts[1])
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"code-spec line {lineno}: cannot parse {line!r}") from None
    if not vn or not cn:
        raise ValueError("code spec needs both vn and cn entries")
    return CodeSpecFile(EnsembleSpec.from_raw(vn, cn, lenient=True), n)


def format_codespec(spec: EnsembleSpec, n: int | None = None, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"# design rate {spec.design_rate:.6f}")
    for d, f in spec.vn_dist.coefficients.items():
        lines.append(f"vn {d} {f:.12g}")
    for d, f in spec.cn_dist.coefficients.items():
        lines.append(f"cn {d} {f:.12g}")
    if n is not None:
        lines.append(f"n {int(n)}")
    return "\n".join(lines) + "\n"


def load_code(ref: str) -> CodeSpecFile:
    """Resolve ``code1``/``code2``/``code3`` or a code-spec file path."""
    if ref.lower() in REFERENCE_RAW:
        return CodeSpecFile(reference_code(ref))
    return parse_codespec(Path(ref).read_text())
