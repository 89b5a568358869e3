import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from helpers import contiguous_regions
from sptmipt.circuits import (CircuitConfig, CircuitEvent, EventBlock, EventKind, Probes, make_rng,
                              run_block, run_trajectory, sample_events, sample_phase, _pool_tables)
from sptmipt.clifford import (PauliOperator, StabilizerState, clipped_endpoints, contains_up_to_sign,
                              contiguous_entropy_table, entanglement_entropy, generator_rank,
                              is_clipped)
from sptmipt.percolation import (PercolationState, bond_events, endpoint_pairs,
                                 entropy_from_clusters, g_string, percolation_update,
                                 prefix_profile, reconstruct_stabilizers, reconstructed_words,
                                 region_entropy, run_percolation, run_percolation_trajectory,
                                 sample_marginal_events, standard_bond_sample)


def ev(kind, site):
    return CircuitEvent(EventKind[kind], site)


def spacetime_partition(n, block):
    """Connected components of the explicit space-time lattice, read off the last row."""
    node = lambda m, s: m * n + (s - 1)
    rows, cols = [], []
    m = 0
    for k in range(len(block)):
        kind, site = int(block.kinds[k]), int(block.sites[k])
        if kind == EventKind.NOOP:
            continue
        m += 1
        for s in range(1, n + 1):
            if not (kind == EventKind.SINGLE and s == site):
                rows.append(node(m - 1, s))
                cols.append(node(m, s))
        if kind == EventKind.STABILIZER:
            rows.append(node(m, site - 1))
            cols.append(node(m, site + 1))
    size = (m + 1) * n
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    _, lab = connected_components(g, directed=False)
    last = lab[m * n:(m + 1) * n]
    groups = {}
    for s, l in enumerate(last, start=1):
        groups.setdefault(l, []).append(s)
    return sorted(groups.values())


# ---------------------------------------------------------------------------
# updates


def test_first_merge():
    st_ = percolation_update(PercolationState.fresh(6), ev("STABILIZER", 2))
    assert st_.lattice_clusters("odd") == [[1, 3], [5]]
    assert st_.lattice_clusters("even") == [[2], [4], [6]]


def test_example_sequence_final_partition():
    # stabilizers at 2, 4, 6 link the odd sites, then Z_3 splits site 3 off
    st_ = PercolationState.fresh(8)
    for e in (ev("STABILIZER", 2), ev("STABILIZER", 4), ev("STABILIZER", 6), ev("SINGLE", 3)):
        percolation_update(st_, e)
    assert st_.lattice_clusters("odd") == [[1, 5, 7], [3]]
    assert st_.lattice_clusters("even") == [[2], [4], [6], [8]]
    assert st_.step_count == 4


def test_split_then_rejoin():
    st_ = PercolationState.fresh(8)
    for e in (ev("STABILIZER", 4), ev("SINGLE", 5), ev("STABILIZER", 6)):
        percolation_update(st_, e)
    assert [5, 7] in st_.lattice_clusters("odd")
    assert [3] in st_.lattice_clusters("odd")


@pytest.mark.parametrize("seed", range(10))
def test_partition_matches_spacetime_connectivity(seed):
    n = 12
    c = CircuitConfig(N=n, p_s=0.3 + 0.04 * seed, p_u=0.0)
    block = sample_events(c, make_rng(c.seed_for(seed)), 1000)
    st_ = run_percolation(PercolationState.fresh(n, capacity=n + 2), block)
    assert st_.clusters() == spacetime_partition(n, block)


def test_unitary_rejected_and_bad_sites():
    st_ = PercolationState.fresh(8)
    with pytest.raises(ValueError):
        percolation_update(st_, CircuitEvent(EventKind.UNITARY, 3, 0))
    with pytest.raises(ValueError):
        percolation_update(st_, ev("STABILIZER", 8))
    with pytest.raises(ValueError):
        percolation_update(st_, ev("SINGLE", 0))


@given(st.integers(0, 2 ** 32 - 1))
def test_parity_decoupling_and_split(seed):
    n = 16
    c = CircuitConfig(N=n, p_s=0.5, p_u=0.0)
    block = sample_events(c, make_rng(seed), 200)
    st_ = run_percolation(PercolationState.fresh(n), block)
    for k in range(30):
        kind = EventKind.SINGLE if k % 2 else EventKind.STABILIZER
        site = int(np.random.default_rng(seed + k).integers(2, n))
        before = {p: st_.lattice_clusters(p) for p in ("odd", "even")}
        percolation_update(st_, CircuitEvent(kind, site))
        untouched = "even" if (site % 2 == (1 if kind == EventKind.SINGLE else 0)) else "odd"
        assert st_.lattice_clusters(untouched) == before[untouched]
        if kind == EventKind.SINGLE:
            assert [site] in st_.clusters()
    # clusters never mix parities
    assert all(len({s % 2 for s in cl}) == 1 for cl in st_.clusters())


def test_compact_and_reserve_keep_labels():
    n = 32
    c = CircuitConfig(N=n, p_s=0.6, p_u=0.0)
    block = sample_events(c, make_rng(1), 5000)
    st_ = run_percolation(PercolationState.fresh(n, capacity=n), block)
    lab = st_.labels().copy()
    st_.compact()
    assert np.array_equal(st_.labels(), lab)
    st_.reserve(10 * st_.parent.size)
    assert np.array_equal(st_.labels(), lab)
    assert st_.parent.size >= st_.next_id + 10
    snap = json.loads(json.dumps(st_.snapshot()))
    assert [tuple(p) for p in snap] == st_.snapshot()


# ---------------------------------------------------------------------------
# reconstruction


def test_reconstruct_singletons():
    rec = reconstruct_stabilizers(PercolationState.fresh(6))
    assert [str(p) for p in rec.operators] == [str(PauliOperator.from_sites(6, z=[i])) for i in range(1, 7)]


def test_reconstruct_example_cluster():
    st_ = PercolationState.fresh(8)
    for e in (ev("STABILIZER", 2), ev("STABILIZER", 4), ev("STABILIZER", 6), ev("SINGLE", 3)):
        percolation_update(st_, e)
    ops = {str(p) for p in reconstruct_stabilizers(st_).operators}
    assert "+ZIIIZIZI" in ops           # Z1 Z5 Z7
    assert "+XZIZXIII" in ops           # g_{1,5} = X1 Z2 Z4 X5
    assert "+IIIIXZXI" in ops           # g_{5,7}
    assert str(g_string(8, 1, 5)) == "+XZIZXIII"
    assert "+IIZIIIII" in ops


@pytest.mark.parametrize("seed", range(10))
def test_reconstruction_complete_and_clipped(seed):
    n = 16
    c = CircuitConfig(N=n, p_s=0.5, p_u=0.0, master_seed=seed)
    block = sample_phase(c, make_rng(c.seed_for(0)), c.t_equil)
    tab = run_block(StabilizerState.zero(n), block, c, _pool_tables(c, None))
    perc = run_percolation(PercolationState.fresh(n), block)
    rec = reconstruct_stabilizers(perc)
    assert len(rec.operators) == n
    assert all(contains_up_to_sign(tab, p) for p in rec.operators)
    for a in rec.operators:
        assert all(a.commutes(b) for b in rec.operators)
    x, z = reconstructed_words(perc)
    assert generator_rank(x, z) == n
    assert is_clipped(rec.operators)


# ---------------------------------------------------------------------------
# entropies


def test_entropy_trivial_cases():
    st_ = PercolationState.fresh(10)
    assert all(entropy_from_clusters(st_, (a, b)) == 0 for a, b in contiguous_regions(10))
    n = 12
    st_ = PercolationState.fresh(n)
    for j in range(2, n):
        percolation_update(st_, ev("STABILIZER", j))
    assert len(st_.clusters()) == 2
    assert all(v == 2 for v in prefix_profile(st_)[1:-1])
    with pytest.raises(ValueError):
        entropy_from_clusters(st_, [1, 3])


def coupled_mismatches(n, seed, probe_every=10, p_s=0.5):
    c = CircuitConfig(N=n, p_s=p_s, p_u=0.0, master_seed=seed)
    block = sample_phase(c, make_rng(c.seed_for(0)), c.t_equil)
    tables = _pool_tables(c, None)
    tab = StabilizerState.zero(n)
    perc = PercolationState.fresh(n)
    bad = 0
    for pos in range(0, len(block), probe_every):
        stop = min(pos + probe_every, len(block))
        run_block(tab, block, c, tables, pos, stop)
        run_percolation(perc, block, pos, stop)
        for a, b in contiguous_regions(n):
            bad += entanglement_entropy(tab, range(a, b + 1)) != entropy_from_clusters(perc, (a, b))
    return bad


@pytest.mark.parametrize("seed", range(100))
def test_cluster_entropy_equals_tableau(seed):
    assert coupled_mismatches(16, seed, p_s=0.3 + 0.004 * seed) == 0


@given(st.integers(0, 2 ** 32 - 1))
def test_region_entropy_noncontiguous(seed):
    rng = np.random.default_rng(seed)
    n = 16
    c = CircuitConfig(N=n, p_s=float(rng.uniform(0.2, 0.8)), p_u=0.0)
    block = sample_events(c, rng, 300)
    tab = run_block(StabilizerState.zero(n), block, c, _pool_tables(c, None))
    perc = run_percolation(PercolationState.fresh(n), block)
    words = reconstructed_words(perc)
    for _ in range(10):
        reg = [q for q in range(1, n + 1) if rng.random() < 0.5]
        assert region_entropy(perc, reg, words) == entanglement_entropy(tab, reg)


def test_endpoint_table_matches_clipped_tableau():
    n = 32
    c = CircuitConfig(N=n, p_s=0.5, p_u=0.0)
    block = sample_phase(c, make_rng(c.seed_for(4)), c.t_equil)
    tab = run_block(StabilizerState.zero(n), block, c, _pool_tables(c, None))
    perc = run_percolation(PercolationState.fresh(n), block)
    t1 = contiguous_entropy_table(*clipped_endpoints(tab), n)
    t2 = contiguous_entropy_table(*endpoint_pairs(perc), n)
    assert np.array_equal(t1, t2)


def test_trajectory_records_identical_to_tableau():
    for layered in (False, True):
        c = CircuitConfig(N=32, p_s=0.45, p_u=0.0, schedule="layered" if layered else "sequential")
        pr = Probes((1, 5, 20, 64), ("S_topo", "S_half", "profile"))
        for i in range(5):
            a = run_trajectory(c, i, probes=pr)
            b = run_percolation_trajectory(c, i, pr)
            assert a.rows == b.rows
    with pytest.raises(ValueError):
        run_percolation_trajectory(CircuitConfig(N=16, p_s=0.5, p_u=0.1), 0)
    with pytest.raises(ValueError):
        run_percolation_trajectory(CircuitConfig(N=16, p_s=0.5, p_u=0.0, single_qubit_basis="X"), 0)


# ---------------------------------------------------------------------------
# standalone samplers


def test_bond_sample_limits():
    rng = np.random.default_rng(0)
    st1 = standard_bond_sample(16, 32, 1.0, rng)
    assert len(st1.clusters()) == 2
    st0 = standard_bond_sample(16, 32, 0.0, rng)
    assert len(st0.clusters()) == 16


def test_bond_sample_matches_layered_tableau():
    n, samples = 32, 1000
    rng = np.random.default_rng(1)
    perc = [prefix_profile(standard_bond_sample(n, 2 * n, 0.5, rng, trailing_vertical=True))[n // 2 - 1]
            for _ in range(samples)]
    c = CircuitConfig(N=n, p_s=0.5, p_u=0.0, schedule="layered", master_seed=99)
    tab = [run_trajectory(c, i).get("S_half") for i in range(samples)]
    se = np.sqrt(np.var(perc, ddof=1) / samples + np.var(tab, ddof=1) / samples)
    assert abs(np.mean(perc) - np.mean(tab)) < 2 * se


def test_bond_events_layout():
    b = bond_events(8, 3, 0.5, np.random.default_rng(2), trailing_vertical=True)
    assert len(b) == 3 * (8 + 6) + 8
    assert set(np.unique(b.kinds)) <= {EventKind.SINGLE, EventKind.STABILIZER, EventKind.NOOP}


def test_marginal_sampler_frequencies():
    n, m = 16, 200_000
    b = sample_marginal_events(n, 0.3, np.random.default_rng(3), m)
    single = b.kinds == EventKind.SINGLE
    assert abs(single.mean() - 0.3) < 0.005
    odd_ops = np.where(single, b.sites % 2 == 1, b.sites % 2 == 0)
    assert abs(odd_ops.mean() - 0.5) < 0.005
    assert b.sites[~single].min() == 2 and b.sites[~single].max() == n - 1
    c = CircuitConfig(N=n, p_s=0.3, p_u=0.0)
    rec = run_percolation_trajectory(c, 0, Probes((4, 32), ("S_half",)), events="marginal")
    assert rec.get("S_half", 32) >= 0
