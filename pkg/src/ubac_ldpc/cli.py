"""Command-line entry point (``ubac-ldpc``).

Every subcommand also accepts ``--config FILE`` holding ``key = value`` lines;
keys are option names (``tau_max`` or ``tau-max``).  Flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .degree_model import format_codespec, load_code
from .density_evolution import de_run, feasibility_margin


def int_list(text: str) -> tuple[int, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(int(p) for p in parts)


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SystemExit(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None:
            raise SystemExit(f"unknown config key {key!r}")
        if isinstance(action, argparse.BooleanOptionalAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)


def _sim_options(p: argparse.ArgumentParser, random_tau: bool) -> None:
    p.add_argument("--code", default="code2", help="code1|code2|code3 or a code-spec file")
    p.add_argument("--n", type=int_list, default=(1024,), help="block lengths, comma separated")
    if random_tau:
        p.add_argument("--tau-max", dest="tau_max", type=int, default=500)
    else:
        p.add_argument("--tau", type=int, default=1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    p.add_argument("--K", dest="K_max", type=int, default=3)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--expurgate", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--expurgate-tau-max", dest="expurgate_tau_max", type=int, default=None)
    p.add_argument("--resample", dest="resample_per_trial", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--mode", choices=("pattern", "transmit"), default="pattern")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", default="results")
    p.add_argument("--time-cap", dest="time_cap", type=float, default=None, help="seconds per point")
    p.add_argument("--min-errors", dest="min_errors", type=int, default=None,
                   help="stop a point once this many block errors are seen")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ubac-ldpc", description=__doc__.splitlines()[0])
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("de-eval", help="run density evolution for one ensemble")
    p.add_argument("--code", default="code2")
    p.add_argument("--max-iters", dest="max_iters", type=int, default=2000)
    p.add_argument("--target", type=float, default=1e-8)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--out", default=None, help="trajectory CSV path")

    p = sp.add_parser("optimize", help="alternate CN/VN optimization from a feasible start")
    p.add_argument("--init", default="code1")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--lmax", type=int, default=20)
    p.add_argument("--rmax", type=int, default=30)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-for-delta", dest="n_for_delta", type=int, default=None)
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--l1-cap", dest="l1_cap", type=float, default=None)
    p.add_argument("--out-dir", dest="out_dir", default="results/optimize")

    p = sp.add_parser("expurgate", help="sample a graph free of short degree-one stopping sets")
    p.add_argument("--code", default="code2")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--tau-max", "--taumax", dest="tau_max", type=int, default=1)
    p.add_argument("--K", dest="K_max", type=int, default=3)
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="graph file path")

    _sim_options(sp.add_parser("simulate-fixed", help="BLER versus n at a fixed offset"), random_tau=False)
    _sim_options(sp.add_parser("simulate-random", help="BER/BLER versus n at a uniform random offset"), random_tau=True)

    p = sp.add_parser("de-vs-sim", help="decoder erased fraction per iteration against DE")
    p.add_argument("--code", default="code2")
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", dest="out_dir", default="results/de_vs_sim")

    p = sp.add_parser("rlc", help="random-linear-code joint decoding experiment")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--rate", type=float, default=0.7)
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None)

    p = sp.add_parser("floor-bound", help="clean-graph probability bound for degree-one stopping sets")
    p.add_argument("--code", default=None)
    p.add_argument("--L1", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--tau-max", "--taumax", dest="tau_max", type=int, default=1)
    p.add_argument("--K", dest="K_max", type=int, default=3)

    for sub in sp.choices.values():
        sub.add_argument("--config", default=None, help="key = value file; flags override it")
    return ap


def _cmd_de_eval(a) -> int:
    spec = load_code(a.code).spec
    traj = de_run(spec.vn_dist, spec.cn_dist, a.max_iters, a.target)
    margin, where = feasibility_margin(spec.vn_dist, spec.cn_dist, a.delta, a.grid)
    print(f"design_rate={spec.design_rate:.6f} converged={traj.converged} "
          f"iterations={traj.iterations_to_target} final_p={traj.p[-1]:.3e} margin={margin:.6g} at y={where:.4f}")
    if a.out:
        traj.write_csv(a.out)
    return 0


def _cmd_optimize(a) -> int:
    from .optimizer import OptimizerConfig, alternate

    cfg = OptimizerConfig(l_max=a.lmax, r_max=a.rmax, delta=a.delta, grid=a.grid, max_rounds=a.rounds,
                          n_for_delta=a.n_for_delta, c=a.c, seed=a.seed, l1_cap=a.l1_cap)
    res = alternate(load_code(a.init).spec, cfg)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "optimized.txt").write_text(format_codespec(res.spec, comment=f"optimized from {a.init}, delta={cfg.effective_delta:g}"))
    res.write_audit(out / "audit.csv")
    print(f"design_rate={res.spec.design_rate:.6f} rounds={len(res.audit) - 1}")
    return 0


def _cmd_expurgate(a) -> int:
    from .tanner import expurgate

    g, attempts = expurgate(load_code(a.code).spec, a.n, a.tau_max, a.K_max, a.budget, a.seed)
    print(f"attempts={attempts} n={g.n} m={g.m} rate={g.achieved_rate():.6f}")
    if a.out:
        Path(a.out).write_text(g.to_text())
    return 0


def _cmd_simulate(a, random_tau: bool) -> int:
    from .harness import ExperimentConfig, run_ber_random_tau, run_bler_fixed_tau

    cfg = ExperimentConfig(
        code=a.code, n_list=tuple(a.n), tau_mode="uniform" if random_tau else "fixed",
        tau=0 if random_tau else a.tau, tau_max=a.tau_max if random_tau else 0, trials=a.trials,
        max_iters=a.max_iters, K_max=a.K_max, budget=a.budget, expurgate=a.expurgate,
        expurgate_tau_max=a.expurgate_tau_max, resample_per_trial=a.resample_per_trial, mode=a.mode,
        seed=a.seed, out_dir=a.out_dir, time_cap=a.time_cap, min_errors=a.min_errors,
    )
    results = (run_ber_random_tau if random_tau else run_bler_fixed_tau)(cfg)
    for r in results:
        print(f"n={r.n} trials={r.trials} bler={r.bler:.4g} ber={r.ber:.4g} mean_iters={r.mean_iters:.2f}")
    return 0


def _cmd_de_vs_sim(a) -> int:
    from .harness import ExperimentConfig, run_de_vs_sim

    cfg = ExperimentConfig(code=a.code, n_list=(a.n,), tau=a.tau, trials=a.trials, max_iters=a.max_iters,
                           seed=a.seed, out_dir=a.out_dir, expurgate=False)
    res = run_de_vs_sim(cfg)
    if res.max_deviation:
        print(f"max deviation per trial: min={min(res.max_deviation):.4g} max={max(res.max_deviation):.4g}")
    return 0


def _cmd_rlc(a) -> int:
    from .gf2 import rlc_experiment

    r = rlc_experiment(a.n, a.rate, a.tau, a.trials, a.seed)
    row = [r.n, r.rate, r.tau, r.trials, r.errors, repr(r.empirical_pe), repr(r.bound)]
    header = ["n", "rate", "tau", "trials", "errors", "empirical_pe", "bound"]
    if a.out:
        with open(a.out, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            wr.writerow(row)
    wr = csv.writer(sys.stdout, lineterminator="\n")
    wr.writerow(header)
    wr.writerow(row)
    return 0


def _cmd_floor_bound(a) -> int:
    from .tanner import error_floor_bound, expected_4ss_count

    if a.code is not None:
        spec = load_code(a.code).spec
        L1, R = spec.L1, spec.design_rate
    elif a.L1 is not None and a.rate is not None:
        L1, R = a.L1, a.rate
    else:
        raise SystemExit("floor-bound needs --code or both --L1 and --rate")
    b = error_floor_bound(L1, R, a.tau_max, a.K_max)
    print(f"bound={b:.6g} expected_4ss={expected_4ss_count(L1, R, a.tau_max):.6g}")
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if pre.config:
        sub = parser._subparsers._group_actions[0].choices[pre.command]
        _apply_config(sub, read_config(pre.config))
    a = parser.parse_args(argv)
    handlers = {
        "de-eval": _cmd_de_eval,
        "optimize": _cmd_optimize,
        "expurgate": _cmd_expurgate,
        "simulate-fixed": lambda x: _cmd_simulate(x, False),
        "simulate-random": lambda x: _cmd_simulate(x, True),
        "de-vs-sim": _cmd_de_vs_sim,
        "rlc": _cmd_rlc,
        "floor-bound": _cmd_floor_bound,
    }
    return handlers[a.command](a)


if __name__ == "__main__":
    raise SystemExit(main())
