import numpy as np
import pytest

from oracles import peel_closure
from ubac_ldpc.channel import make_instance, sample_erasure_pattern
from ubac_ldpc.decoder import (
    ERASED,
    ObservationInconsistent,
    decode,
    decode_erasure_pattern,
    peel_sequential,
)
from ubac_ldpc.degree_model import EnsembleSpec, validate
from ubac_ldpc.gf2 import generator_basis
from ubac_ldpc.tanner import TannerGraph, sample_graph


def four_ss_instance():
    return TannerGraph.from_adjacency([[0, 1, 2], [0, 1, 2], [1], [0], [1], [0]], 3)


def random_codeword(g, rng):
    G = generator_basis(g)
    return (rng.integers(0, 2, G.shape[0]) @ G % 2).astype(np.uint8)


def oracle_mask(g, tau, erased):
    adj = [list(a) for a in g.adjacency]
    vns = {("u1", int(p)) for p in erased} | {("u2", int(p) - tau) for p in erased}
    left = peel_closure(adj, g.m, g.n, tau, vns, [int(p) for p in erased])
    mask = np.zeros(2 * g.n, dtype=bool)
    for u, i in left:
        mask[i if u == "u1" else g.n + i] = True
    return mask


SPECS = [
    EnsembleSpec(validate({1: 0.4, 2: 0.4, 4: 0.2}), validate({5: 1.0}, side="check")),
    EnsembleSpec(validate({2: 1.0}), validate({4: 1.0}, side="check")),
    EnsembleSpec(validate({1: 0.6, 3: 0.4}), validate({6: 1.0}, side="check")),
]


def random_instances(count, seed):
    rng = np.random.default_rng(seed)
    for k in range(count):
        spec = SPECS[k % len(SPECS)]
        n = int(rng.integers(20, 150))
        g = sample_graph(spec, n, int(rng.integers(2**32)))
        tau = int(rng.integers(1, n // 2))
        yield g, tau, rng


def test_nothing_erased():
    g = sample_graph(SPECS[1], 40, 0)
    rng = np.random.default_rng(0)
    a = random_codeword(g, rng)
    d = rng.integers(0, 2, g.n)
    # at tau = n there is no overlap, so no symbol can cancel
    a1, a2 = a, random_codeword(g, rng)
    inst = make_instance(a1, a2, g.n, d)
    res = decode(g, g.n, inst.observation, d)
    assert res.success and res.iterations_used == 0
    assert np.array_equal(res.user1_values, a1) and np.array_equal(res.user2_values, a2)


def test_three_vn_hand_instance():
    g = TannerGraph.from_adjacency([[0], [0], [0]], 1)
    a1 = np.array([1, 1, 0], dtype=np.uint8)
    a2 = np.array([1, 1, 0], dtype=np.uint8)
    d = np.zeros(3, dtype=np.uint8)
    inst = make_instance(a1, a2, 1, d)
    assert inst.erased_overlap.tolist() == [2]
    res = decode(g, 1, inst.observation, d)
    assert res.success and res.iterations_used == 1
    assert res.user1_values.tolist() == [1, 1, 0] and res.user2_values.tolist() == [1, 1, 0]
    assert res.erased_fraction_per_iter.tolist() == [2 / 6, 0.0]


def test_four_stopping_set_stalls():
    g = four_ss_instance()
    res = decode_erasure_pattern(g, 1, [3, 5])
    assert not res.success and res.residual_erasures == 4
    assert np.flatnonzero(res.user1_values == ERASED).tolist() == [3, 5]
    assert np.flatnonzero(res.user2_values == ERASED).tolist() == [2, 4]
    # same stall with real symbols: zero words, dither flips at 3 and 5
    d = np.array([0, 0, 0, 1, 1, 0], dtype=np.uint8)
    z = np.zeros(6, dtype=np.uint8)
    inst = make_instance(z, z, 1, d)
    assert inst.erased_overlap.tolist() == [3, 5]
    assert np.array_equal(decode(g, 1, inst.observation, d).erased_mask(), res.erased_mask())


def test_single_erasure_resolved_by_pinned_neighbourhood():
    # user-1 VN 2 has degree 2; its CNs see only pinned VNs
    g = TannerGraph.from_adjacency([[0], [1], [0, 1], [2], [2]], 3)
    res = decode_erasure_pattern(g, 1, [2])
    assert res.success and res.iterations_used == 1


def test_empty_pattern():
    res = decode_erasure_pattern(sample_graph(SPECS[0], 50, 0), 3, [])
    assert res.success and res.iterations_used == 0


def test_all_overlap_erased_regular_matches_oracle():
    for s in range(10):
        g = sample_graph(SPECS[1], 24, s)
        tau = 1 + s % 3
        erased = np.arange(tau, g.n)
        assert np.array_equal(decode_erasure_pattern(g, tau, erased).erased_mask(), oracle_mask(g, tau, erased))


def test_pattern_range_checked():
    g = sample_graph(SPECS[1], 24, 0)
    with pytest.raises(ValueError):
        decode_erasure_pattern(g, 3, [1])
    with pytest.raises(ValueError):
        decode_erasure_pattern(g, 3, [24])


def test_schedule_invariance():
    for k, (g, tau, rng) in enumerate(random_instances(100, 1)):
        e = sample_erasure_pattern(g.n, tau, rng)
        flood = decode_erasure_pattern(g, tau, e).erased_mask()
        assert np.array_equal(flood, peel_sequential(g, tau, e, seed=k))
        assert np.array_equal(flood, peel_sequential(g, tau, e, seed=k + 1000))
        assert np.array_equal(flood, oracle_mask(g, tau, e))


def test_decode_matches_pattern_mode():
    for g, tau, rng in random_instances(100, 2):
        a1, a2 = random_codeword(g, rng), random_codeword(g, rng)
        d = rng.integers(0, 2, g.n).astype(np.uint8)
        inst = make_instance(a1, a2, tau, d)
        full = decode(g, tau, inst.observation, d)
        pat = decode_erasure_pattern(g, tau, inst.erased_overlap)
        assert np.array_equal(full.erased_mask(), pat.erased_mask())
        assert full.iterations_used == pat.iterations_used


def test_no_undetected_errors_and_trace_properties():
    for g, tau, rng in random_instances(100, 3):
        a1, a2 = random_codeword(g, rng), random_codeword(g, rng)
        d = rng.integers(0, 2, g.n).astype(np.uint8)
        inst = make_instance(a1, a2, tau, d)
        res = decode(g, tau, inst.observation, d)
        known1 = res.user1_values != ERASED
        known2 = res.user2_values != ERASED
        # every recovered bit is correct, whether or not decoding completed
        assert np.array_equal(res.user1_values[known1], a1[known1])
        assert np.array_equal(res.user2_values[known2], a2[known2])
        tr = res.erased_fraction_per_iter
        assert np.all(np.diff(tr) <= 0)
        assert tr[-1] == res.residual_erasures / (2 * g.n)
        joint_edges = 2 * g.edge_count + 2 * (g.n - tau)
        assert res.updates <= joint_edges * max(res.iterations_used, 1)


def test_recovered_values_never_change():
    # decoding with a smaller iteration budget yields a subset of the final knowledge
    for g, tau, rng in random_instances(30, 4):
        a1, a2 = random_codeword(g, rng), random_codeword(g, rng)
        d = rng.integers(0, 2, g.n).astype(np.uint8)
        inst = make_instance(a1, a2, tau, d)
        full = decode(g, tau, inst.observation, d)
        prev = None
        for it in range(full.iterations_used + 1):
            part = decode(g, tau, inst.observation, d, max_iters=it)
            known = ~part.erased_mask()
            vals = np.concatenate([part.user1_values, part.user2_values])
            final = np.concatenate([full.user1_values, full.user2_values])
            assert np.array_equal(vals[known], final[known])
            if prev is not None:
                assert np.all(known[prev])
            prev = known


def test_inconsistent_observation():
    g = TannerGraph.from_adjacency([[0], [0], [0]], 1)
    d = np.zeros(3, dtype=np.uint8)
    # user 1 pinned to odd weight 1, 1, 1
    with pytest.raises(ObservationInconsistent):
        decode(g, 0, np.array([2, 2, 2]), d)
    with pytest.raises(ObservationInconsistent):
        decode(g, 1, np.array([1, 1, 2, 1]), d)
    with pytest.raises(ObservationInconsistent):
        decode(g, 1, np.array([1, 2]), d)


def test_trace_csv(tmp_path):
    g = four_ss_instance()
    res = decode_erasure_pattern(g, 1, [1, 3, 5])
    path = tmp_path / "trace.csv"
    res.write_trace(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,erased_fraction" and len(lines) == len(res.erased_fraction_per_iter) + 1
