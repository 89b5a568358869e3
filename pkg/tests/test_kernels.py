"""The compiled kernels and the numpy fallback must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sptmipt import _backend, _pykernels as py
from sptmipt.circuits import CircuitConfig, Probes, make_rng, run_trajectory, sample_phase, _pool_tables
from sptmipt.clifford import StabilizerState
from sptmipt.percolation import PercolationState, run_percolation_trajectory

cy = pytest.importorskip("sptmipt._kernels")


def state_arrays(n, seed, steps=3, **kw):
    c = CircuitConfig(N=n, master_seed=seed, **kw)
    block = sample_phase(c, make_rng(c.seed_for(0)), steps)
    s = StabilizerState.zero(n)
    return c, block, s


@pytest.mark.parametrize("n", [8, 64, 70, 130])
@pytest.mark.parametrize("variant", [dict(p_s=0.4, p_u=0.3), dict(p_s=0.5, p_u=0.0),
                                     dict(p_s=0.3, p_u=0.3, single_qubit_basis="X"),
                                     dict(p_s=0.3, p_u=0.3, boundary="periodic"),
                                     dict(p_s=0.5, p_u=0.0, schedule="layered")])
def test_run_events_and_clip_agree(n, variant):
    c, block, s = state_arrays(n, 1, **variant)
    tables = _pool_tables(c, None)
    outs = []
    for k in (py, cy):
        x, z, r = s.x.copy(), s.z.copy(), s.r.copy()
        k.run_events(x, z, r, n, block.kinds, block.sites, block.gates, block.bits, tables,
                     0, len(block), n, c.single_qubit_basis == "X", c.periodic)
        left, right = k.clip_endpoints(x.copy()[n:], z.copy()[n:], r.copy()[n:], n)
        mask = np.zeros(x.shape[1], dtype=np.uint64)
        mask[0] = np.uint64(0x5555555555555555)
        rank = k.region_rank(x, z, n, 2 * n, mask)
        outs.append((x, z, r, np.asarray(left), np.asarray(right), rank,
                     k.gf2_rank(np.ascontiguousarray(np.concatenate([x, z], axis=1)))))
    for a, b in zip(*outs):
        assert np.array_equal(np.asarray(a), np.asarray(b))


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
def test_measure_and_gate_agree(seed, nw):
    rng = np.random.default_rng(seed)
    n = 16 * nw
    c, block, s = state_arrays(n, seed % 97, steps=1, p_s=0.3, p_u=0.4)
    x0, z0, r0 = s.x.copy(), s.z.copy(), s.r.copy()
    py.run_events(x0, z0, r0, n, block.kinds, block.sites, block.gates, block.bits,
                  _pool_tables(c, None), 0, len(block), n, False, False)
    px = rng.integers(0, 2 ** 63, x0.shape[1]).astype(np.uint64)
    pz = rng.integers(0, 2 ** 63, x0.shape[1]).astype(np.uint64)
    if n % 64:
        keep = np.uint64((1 << (n % 64)) - 1)
        px[-1] &= keep
        pz[-1] &= keep
    bit = int(rng.integers(0, 2))
    res = []
    for k in (py, cy):
        x, z, r = x0.copy(), z0.copy(), r0.copy()
        code = k.measure_words(x, z, r, n, px, pz, bit)
        cols = np.array([1, 5, n - 1], dtype=np.int64)
        k.apply_gate(x, z, r, cols, _pool_tables(c, None)[seed % 4096])
        xc, zc, rc = x0[:n // 2].copy(), z0[:n // 2].copy(), r0[:n // 2].copy()
        m = k.channel_measure_words(xc, zc, rc, n // 2, px, pz)
        res.append((code, x, z, r, m, xc, zc, rc))
    for a, b in zip(*res):
        assert np.array_equal(np.asarray(a), np.asarray(b))


@pytest.mark.parametrize("p_u", [0.0, 0.3])
def test_channel_run_agrees(p_u):
    from sptmipt.channel import initial_group
    n = 32
    c = CircuitConfig(N=n, p_s=0.4, p_u=p_u)
    block = sample_phase(c, make_rng(c.seed_for(2)), 40)
    g = initial_group(n)
    res = []
    for k in (py, cy):
        x, z, r = g.x.copy(), g.z.copy(), g.r.copy()
        out = k.channel_run_events(x, z, r, g.n, block.kinds, block.sites, block.gates,
                                   _pool_tables(c, None), 0, len(block), n, False, False, 2)
        res.append((tuple(int(v) for v in out), x, z, r))
    for a, b in zip(*res):
        assert np.array_equal(np.asarray(a), np.asarray(b))


def test_percolation_kernels_agree():
    n = 64
    c = CircuitConfig(N=n, p_s=0.5, p_u=0.0)
    block = sample_phase(c, make_rng(c.seed_for(3)), 2 * n)
    res = []
    for k in (py, cy):
        st_ = PercolationState.fresh(n)
        st_.reserve(len(block))
        nid = k.perc_run(st_.parent, st_.size, st_.node, st_.next_id, block.kinds, block.sites,
                         0, len(block))
        roots = np.asarray(k.perc_roots(st_.parent, st_.node))
        res.append((nid, st_.parent[:nid].copy(), st_.size[:nid].copy(), st_.node.copy(), roots,
                    np.asarray(k.prefix_crossings(roots))))
    for a, b in zip(*res):
        assert np.array_equal(np.asarray(a), np.asarray(b))


def test_backend_switch_gives_identical_records():
    c = CircuitConfig(N=24, p_s=0.4, p_u=0.2, ancilla_protocol="scrambled")
    cp = CircuitConfig(N=24, p_s=0.5, p_u=0.0)
    pr = Probes((8, 48), ("S_topo", "S_half", "profile"))
    before = _backend.name()
    try:
        _backend.use("python")
        a = run_trajectory(c, 0)
        ap = run_percolation_trajectory(cp, 0, pr)
        _backend.use("compiled")
        b = run_trajectory(c, 0)
        bp = run_percolation_trajectory(cp, 0, pr)
    finally:
        _backend.use(before)
    assert a == b and ap == bp
    with pytest.raises(ValueError):
        _backend.use("fortran")
