"""Experiment orchestration: DE-vs-simulation traces, BLER at fixed offset,
BER/BLER at random offset, and the CSV/manifest plumbing shared by the CLI.

Every random draw is seeded from ``(master seed, label)`` through
:func:`~ubac_ldpc.seeding.derive_seed`, so rerunning a config reproduces its
CSV files byte for byte (unless a wall-clock cap cuts a point short).
"""

from __future__ import annotations

import csv
import math
import platform
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .channel import make_instance, sample_erasure_pattern
from .decoder import DEFAULT_MAX_ITERS, decode, decode_erasure_pattern
from .degree_model import EnsembleSpec, load_code
from .density_evolution import de_run
from .gf2 import generator_basis
from .seeding import derive_seed
from .tanner import TannerGraph, expurgate, sample_graph

SIM_COLUMNS = ["code", "n", "tau_mode", "tau_max", "trials", "block_errors", "bler", "bit_errors", "ber", "mean_iters", "seed"]
EXTRA_COLUMNS = ["bler_lo", "bler_hi", "tau0_draws", "ber_user1", "ber_user2", "attempts", "undetected_errors"]


@dataclass
class ExperimentConfig:
    code: str = "code2"
    n_list: tuple[int, ...] = (1024,)
    tau_mode: str = "fixed"
    tau: int = 1
    tau_max: int = 0
    trials: int = 100
    max_iters: int = DEFAULT_MAX_ITERS
    K_max: int = 3
    budget: int = 20
    expurgate: bool = True
    expurgate_tau_max: int | None = None
    resample_per_trial: bool = False
    mode: str = "pattern"
    seed: int = 1
    out_dir: str | None = None
    time_cap: float | None = None
    min_errors: int | None = None

    def __post_init__(self):
        self.n_list = tuple(int(n) for n in self.n_list)
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must hold positive block lengths")
        if list(self.n_list) != sorted(self.n_list):
            raise ValueError("n_list must be sorted ascending")
        if self.tau_mode not in ("fixed", "uniform"):
            raise ValueError("tau_mode is 'fixed' or 'uniform'")
        if self.mode not in ("pattern", "transmit"):
            raise ValueError("mode is 'pattern' or 'transmit'")
        if self.trials < 0 or self.max_iters < 1 or self.K_max < 1 or self.budget < 0:
            raise ValueError("counts must be positive")
        if self.tau < 0 or self.tau_max < 0:
            raise ValueError("offsets must be non-negative")

    @property
    def expurgation_range(self) -> int:
        if self.expurgate_tau_max is not None:
            return self.expurgate_tau_max
        return max(self.tau, 1) if self.tau_mode == "fixed" else 1

    def spec(self) -> EnsembleSpec:
        return load_code(self.code).spec

    @property
    def code_label(self) -> str:
        return Path(self.code).stem if Path(self.code).suffix else self.code


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class PointResult:
    code: str
    n: int
    tau_mode: str
    tau_max: int
    trials: int
    block_errors: int
    bit_errors: int
    bit_errors_user: tuple[int, int]
    iterations: int
    decoded_trials: int
    tau0_draws: int
    attempts: int
    undetected_errors: int
    seed: int
    error_sizes: dict[int, int] = field(default_factory=dict)

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials if self.trials else float("nan")

    @property
    def ber(self) -> float:
        return self.bit_errors / (2 * self.n * self.trials) if self.trials else float("nan")

    @property
    def mean_iters(self) -> float:
        return self.iterations / self.decoded_trials if self.decoded_trials else 0.0

    @property
    def bler_sigma(self) -> float:
        p = self.bler
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else float("nan")

    def row(self) -> list:
        lo, hi = wilson_interval(self.block_errors, self.trials)
        per = [b / (self.n * self.trials) if self.trials else float("nan") for b in self.bit_errors_user]
        return [
            self.code, self.n, self.tau_mode, self.tau_max, self.trials, self.block_errors,
            repr(self.bler), self.bit_errors, repr(self.ber), repr(self.mean_iters), self.seed,
            repr(lo), repr(hi), self.tau0_draws, repr(per[0]), repr(per[1]), self.attempts,
            self.undetected_errors,
        ]


def point_graph(cfg: ExperimentConfig, spec: EnsembleSpec, n: int, label: str) -> tuple[TannerGraph, int]:
    seed = derive_seed(cfg.seed, label)
    if cfg.expurgate:
        return expurgate(spec, n, cfg.expurgation_range, cfg.K_max, cfg.budget, seed)
    return sample_graph(spec, n, seed), 0


def _transmit_trial(graph: TannerGraph, tau: int, rng: np.random.Generator, max_iters: int):
    G = generator_basis(graph)
    n = graph.n
    a1 = (rng.integers(0, 2, G.shape[0]) @ G % 2).astype(np.uint8)
    a2 = (rng.integers(0, 2, G.shape[0]) @ G % 2).astype(np.uint8)
    dither = rng.integers(0, 2, n).astype(np.uint8)
    inst = make_instance(a1, a2, tau, dither)
    res = decode(graph, tau, inst.observation, dither, max_iters)
    wrong1 = int(np.sum(res.user1_values != a1))
    wrong2 = int(np.sum(res.user2_values != a2))
    undetected = int(res.success and (wrong1 or wrong2))
    return res, wrong1, wrong2, undetected


def simulate_point(cfg: ExperimentConfig, n: int) -> PointResult:
    spec = cfg.spec()
    code = cfg.code_label
    tau_hi = cfg.tau if cfg.tau_mode == "fixed" else cfg.tau_max
    graph, attempts = (None, 0) if cfg.resample_per_trial else point_graph(cfg, spec, n, f"graph/{code}/{n}")
    block = bits = iters = decoded = tau0 = undetected = 0
    per_user = [0, 0]
    sizes: dict[int, int] = {}
    start = time.monotonic()
    done = 0
    for t in range(cfg.trials):
        if cfg.min_errors is not None and block >= cfg.min_errors:
            break
        if cfg.time_cap is not None and time.monotonic() - start > cfg.time_cap:
            warnings.warn(f"n={n}: time cap reached after {done} of {cfg.trials} trials", RuntimeWarning)
            break
        rng = np.random.default_rng(derive_seed(cfg.seed, f"trial/{code}/{n}/{t}"))
        tau = cfg.tau if cfg.tau_mode == "fixed" else int(rng.integers(0, cfg.tau_max + 1))
        done += 1
        if tau == 0:
            # full overlap only supports rates below 1/2; counted as lost, not decoded
            tau0 += 1
            block += 1
            e = sample_erasure_pattern(n, 0, rng).size
            bits += 2 * e
            per_user[0] += e
            per_user[1] += e
            continue
        g = graph
        if g is None:
            g, a = point_graph(cfg, spec, n, f"graph/{code}/{n}/{t}")
            attempts += a
        if cfg.mode == "pattern":
            res = decode_erasure_pattern(g, tau, sample_erasure_pattern(n, tau, rng), cfg.max_iters)
            w1 = int(np.sum(res.user1_values < 0))
            w2 = int(np.sum(res.user2_values < 0))
        else:
            res, w1, w2, u = _transmit_trial(g, tau, rng, cfg.max_iters)
            undetected += u
        decoded += 1
        iters += res.iterations_used
        if w1 or w2:
            block += 1
            sizes[w1 + w2] = sizes.get(w1 + w2, 0) + 1
        bits += w1 + w2
        per_user[0] += w1
        per_user[1] += w2
    return PointResult(code, n, cfg.tau_mode, tau_hi, done, block, bits, tuple(per_user), iters, decoded,
                       tau0, attempts, undetected, cfg.seed, sizes)


def write_sim_csv(path, results: list[PointResult]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SIM_COLUMNS + EXTRA_COLUMNS)
        for r in results:
            wr.writerow(r.row())


def write_manifest(path, cfg, extra: dict | None = None) -> None:
    import numba

    from . import __version__

    lines = ["# run manifest"]
    for k, v in (asdict(cfg) if hasattr(cfg, "__dataclass_fields__") else dict(cfg)).items():
        lines.append(f"{k} = {v}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    lines.append(f"python = {sys.version.split()[0]}")
    lines.append(f"platform = {platform.platform()}")
    lines.append(f"numpy = {np.__version__}")
    lines.append(f"numba = {numba.__version__}")
    lines.append(f"ubac_ldpc = {__version__}")
    Path(path).write_text("\n".join(lines) + "\n")


def _emit(cfg: ExperimentConfig, name: str, results: list[PointResult]) -> None:
    if cfg.out_dir is None:
        return
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sim_csv(out / f"{name}.csv", results)
    write_manifest(out / f"{name}.manifest.txt", cfg)


def run_bler_fixed_tau(cfg: ExperimentConfig) -> list[PointResult]:
    if cfg.tau_mode != "fixed":
        raise ValueError("run_bler_fixed_tau needs tau_mode='fixed'")
    results = [simulate_point(cfg, n) for n in cfg.n_list]
    _emit(cfg, "bler_fixed_tau", results)
    return results


def run_ber_random_tau(cfg: ExperimentConfig) -> list[PointResult]:
    if cfg.tau_mode != "uniform":
        raise ValueError("run_ber_random_tau needs tau_mode='uniform'")
    results = [simulate_point(cfg, n) for n in cfg.n_list]
    _emit(cfg, "ber_random_tau", results)
    return results


@dataclass
class DeVsSimResult:
    de_p: np.ndarray
    traces: list[np.ndarray]
    max_deviation: list[float]


def trace_deviation(trace: np.ndarray, de_p: np.ndarray) -> float:
    """Largest |simulated - DE| over iterations, holding the shorter sequence at its last value."""
    L = max(trace.size, de_p.size)
    a = np.pad(trace, (0, L - trace.size), mode="edge")
    b = np.pad(de_p, (0, L - de_p.size), mode="edge")
    return float(np.max(np.abs(a - b)))


def run_de_vs_sim(cfg: ExperimentConfig, de_target: float = 1e-6) -> DeVsSimResult:
    """Erased-VN fraction per iteration on fresh graphs versus the DE prediction."""
    if len(cfg.n_list) != 1:
        raise ValueError("run_de_vs_sim takes a single block length")
    n = cfg.n_list[0]
    spec = cfg.spec()
    code = cfg.code_label
    traj = de_run(spec.vn_dist, spec.cn_dist, max_iters=cfg.max_iters, target=de_target)
    de_p = np.array(traj.p)
    traces, devs = [], []
    for t in range(cfg.trials):
        g = sample_graph(spec, n, derive_seed(cfg.seed, f"de-vs-sim/graph/{code}/{n}/{t}"))
        e = sample_erasure_pattern(n, cfg.tau, derive_seed(cfg.seed, f"de-vs-sim/pattern/{code}/{n}/{t}"))
        res = decode_erasure_pattern(g, cfg.tau, e, cfg.max_iters)
        traces.append(res.erased_fraction_per_iter)
        devs.append(trace_deviation(res.erased_fraction_per_iter, de_p))
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj.write_csv(out / "de_trajectory.csv")
        with open(out / "sim_traces.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["trial", "iter", "erased_fraction", "de_p"])
            for t, tr in enumerate(traces):
                for i, f in enumerate(tr):
                    wr.writerow([t, i, repr(float(f)), repr(float(de_p[min(i, de_p.size - 1)]))])
        with open(out / "summary.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["trial", "iterations", "final_fraction", "max_deviation"])
            for t, (tr, d) in enumerate(zip(traces, devs)):
                wr.writerow([t, tr.size - 1, repr(float(tr[-1])), repr(d)])
        write_manifest(out / "de_vs_sim.manifest.txt", cfg, {"de_target": de_target})
    return DeVsSimResult(de_p, traces, devs)
