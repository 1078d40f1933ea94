import numpy as np
import pytest

from ubac_ldpc.degree_model import Perspective, Side, as_edge, design_rate, eval_poly, validate
from ubac_ldpc.density_evolution import feasibility_margin
from ubac_ldpc.optimizer import (
    Infeasible,
    OptimizerConfig,
    alternate,
    optimize_cn,
    optimize_vn,
)


def mean_inv(d):
    return sum(f / k for k, f in d.as_dict().items())


def test_config_invariants():
    with pytest.raises(ValueError):
        OptimizerConfig(grid=16)
    with pytest.raises(ValueError):
        OptimizerConfig(r_max=1)
    with pytest.raises(ValueError):
        OptimizerConfig(delta=-1)
    assert OptimizerConfig(n_for_delta=10000).effective_delta == pytest.approx(0.005)


def test_cn_step_regular_vn():
    lam = validate({2: 1.0}, "edge")
    cfg = OptimizerConfig(delta=0.05, r_max=4, grid=64)
    rho = optimize_cn(lam, cfg)
    assert rho.perspective is Perspective.EDGE and rho.side is Side.CHECK
    assert sum(rho.fractions) == pytest.approx(1.0, abs=1e-12)
    assert feasibility_margin(lam, rho, 0.05, 64)[0] > 0


def test_cn_step_beats_code1_witness(code1):
    cfg = OptimizerConfig(delta=0.0, r_max=10)
    rho = optimize_cn(code1.lam, cfg)
    assert mean_inv(rho) <= mean_inv(code1.rho) + 1e-8
    assert feasibility_margin(code1.lam, rho, 0.0, cfg.grid)[0] > 0


def test_cn_step_survives_finer_grid(code1):
    rng = np.random.default_rng(3)
    ok = 0
    trials = 20
    for _ in range(trials):
        delta = float(rng.uniform(0, 0.02))
        grid = int(rng.integers(32, 200))
        cfg = OptimizerConfig(delta=delta, r_max=12, grid=grid)
        rho = optimize_cn(code1.lam, cfg)
        ok += feasibility_margin(code1.lam, rho, delta, 4 * grid)[0] > 0
    assert ok / trials >= 0.95


@pytest.mark.parametrize("step", ["cn", "vn"])
def test_delta_one_infeasible(code1, step):
    cfg = OptimizerConfig(delta=1.0)
    with pytest.raises(Infeasible):
        optimize_cn(code1.lam, cfg) if step == "cn" else optimize_vn(code1.rho, cfg)


def test_vn_step_beats_code1_witness(code1):
    cfg = OptimizerConfig(delta=0.0, l_max=8)
    lam = optimize_vn(code1.rho, cfg, init=code1.lam)
    assert mean_inv(lam) >= mean_inv(code1.lam) - 1e-6
    assert feasibility_margin(lam, code1.rho, 0.0, cfg.grid)[0] > 0


def test_vn_step_one_point_simplex():
    rho = validate({3: 1.0}, "edge", "check")
    cfg = OptimizerConfig(delta=0.0, l_min=2, l_max=2)
    lam = optimize_vn(rho, cfg)
    assert lam.as_dict() == {2: 1.0}
    rho_bad = validate({30: 1.0}, "edge", "check")
    with pytest.raises(Infeasible):
        optimize_vn(rho_bad, cfg)


def test_vn_step_respects_degree_one_cap(code1):
    cfg = OptimizerConfig(delta=1e-3, l_max=8, l1_cap=0.2)
    lam = optimize_vn(code1.rho, cfg, init=code1.lam)
    L1 = (lam.get(1) / 1) / mean_inv(lam)
    assert L1 <= 0.2 + 1e-7


def test_alternate_zero_rounds_returns_init(code1):
    res = alternate(code1, OptimizerConfig(max_rounds=0))
    assert res.spec is code1
    assert len(res.audit) == 1


def test_alternate_rejects_infeasible_start(code1):
    with pytest.raises(Infeasible):
        alternate(code1, OptimizerConfig(delta=0.5))


def test_alternate_improves_code1(code1, tmp_path):
    cfg = OptimizerConfig(delta=1e-3, max_rounds=5)
    res = alternate(code1, cfg)
    rates = [r.rate for r in res.audit if r.accepted]
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert res.spec.design_rate >= 0.689
    assert feasibility_margin(res.spec.lam, res.spec.rho, 1e-3, cfg.grid)[0] > 0
    # the stored rate is the rate of the returned ensemble
    assert rates[-1] == pytest.approx(design_rate(res.spec.vn_dist, res.spec.cn_dist))
    # the returned distributions are valid
    for d in (res.spec.vn_dist, res.spec.cn_dist):
        validate(d.as_dict(), "node", d.side.value)
    path = tmp_path / "audit.csv"
    res.write_audit(path)
    assert path.read_text().splitlines()[0] == "round,rate,margin,accepted,note"


def test_margin_is_independent_of_optimizer(code1):
    # direct evaluation of x - F(x) on a grid for the optimized pair
    res = alternate(code1, OptimizerConfig(delta=1e-3, max_rounds=1))
    lam, rho, L = as_edge(res.spec.vn_dist), as_edge(res.spec.cn_dist), res.spec.vn_dist
    ys = np.linspace(1e-3, 1, 2000)
    x = 0.5 * eval_poly(L, ys) * eval_poly(lam, ys)
    F = 1 - eval_poly(rho, 1 - x)
    assert np.all(F < ys)
