"""Two-lattice percolation picture of the measurement-only (p_u = 0) dynamics.

Qubits of one colour (cluster) form an isolated SPT block stabilized by the
Z string over the cluster and the g strings X_a Z..Z X_b between
consecutive members. A Z_i measurement splits site i off its cluster; a g_j
measurement merges the clusters of j-1 and j+1. Odd and even sites never
interact, so both lattices live in one union-find without any mixing.

Splits use the fresh-node trick: the site is pointed at a brand new
union-find element, old elements are never touched again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .analysis import s_topo, topo_regions
from .circuits import (CHAIN_OBSERVABLES, CircuitConfig, EventBlock, EventKind, Probes,
                       TrajectoryRecord, make_rng, sample_phase)
from .clifford import PauliOperator, WORD, crossing_entropy, n_words


@dataclass
class PercolationState:
    N: int
    parent: np.ndarray
    size: np.ndarray
    node: np.ndarray
    next_id: int
    step_count: int = 0

    @classmethod
    def fresh(cls, N: int, capacity: int | None = None) -> "PercolationState":
        cap = max(capacity or 4 * N, N)
        parent = np.arange(cap, dtype=np.int64)
        size = np.ones(cap, dtype=np.int64)
        return cls(N, parent, size, np.arange(N, dtype=np.int64), N)

    def copy(self) -> "PercolationState":
        return PercolationState(self.N, self.parent.copy(), self.size.copy(), self.node.copy(),
                                self.next_id, self.step_count)

    def roots(self) -> np.ndarray:
        return _backend.kernels.perc_roots(self.parent, self.node)

    def labels(self) -> np.ndarray:
        """Canonical cluster label per site: the smallest (1-based) site in its cluster."""
        roots = self.roots()
        _, inv = np.unique(roots, return_inverse=True)
        mins = np.full(inv.max() + 1, self.N + 1, dtype=np.int64)
        np.minimum.at(mins, inv, np.arange(1, self.N + 1))
        return mins[inv]

    def clusters(self) -> list[list[int]]:
        """All clusters as sorted 1-based site lists, ordered by smallest site."""
        lab = self.labels()
        out: dict[int, list[int]] = {}
        for s, l in enumerate(lab, start=1):
            out.setdefault(int(l), []).append(s)
        return [out[k] for k in sorted(out)]

    def lattice_clusters(self, parity: str) -> list[list[int]]:
        """Clusters of the odd (sites 1, 3, ...) or even (2, 4, ...) lattice."""
        want = 1 if parity == "odd" else 0
        return [c for c in self.clusters() if c[0] % 2 == want]

    def site_cluster(self, parity: str) -> dict[int, int]:
        want = 1 if parity == "odd" else 0
        lab = self.labels()
        return {s: int(lab[s - 1]) for s in range(1, self.N + 1) if s % 2 == want}

    def snapshot(self) -> list[tuple[int, int]]:
        return [(s, int(l)) for s, l in enumerate(self.labels(), start=1)]

    def compact(self):
        """Drop retired union-find elements; labels are unchanged."""
        roots = self.roots()
        uniq, inv = np.unique(roots, return_inverse=True)
        k = uniq.size
        cap = self.parent.size
        self.parent[:] = np.arange(cap)
        self.size[:] = 1
        self.size[:k] = np.bincount(inv, minlength=k)
        self.node[:] = inv
        self.next_id = k

    def reserve(self, extra: int):
        if self.next_id + extra <= self.parent.size:
            return
        self.compact()
        need = self.next_id + extra
        if need > self.parent.size:
            cap = max(need, 2 * self.parent.size)
            grow = cap - self.parent.size
            self.parent = np.concatenate([self.parent, np.arange(self.parent.size, cap)])
            self.size = np.concatenate([self.size, np.ones(grow, dtype=np.int64)])


def run_percolation(state: PercolationState, block: EventBlock, start: int = 0,
                    stop: int | None = None) -> PercolationState:
    stop = len(block) if stop is None else stop
    ks = block.kinds[start:stop]
    if np.any(ks == EventKind.UNITARY):
        raise ValueError("unitary events have no percolation representation")
    state.reserve(int(np.count_nonzero(ks == EventKind.SINGLE)))
    state.next_id = int(_backend.kernels.perc_run(state.parent, state.size, state.node,
                                                  state.next_id, block.kinds, block.sites,
                                                  start, stop))
    state.step_count += stop - start
    return state


def percolation_update(state: PercolationState, event) -> PercolationState:
    if event.kind == EventKind.UNITARY:
        raise ValueError("unitary events have no percolation representation")
    if event.kind == EventKind.STABILIZER and not 2 <= event.site <= state.N - 1:
        raise ValueError("stabilizer site outside 2..N-1")
    if event.kind == EventKind.SINGLE and not 1 <= event.site <= state.N:
        raise ValueError("single site outside 1..N")
    return run_percolation(state, EventBlock.from_events([event]))


# ---------------------------------------------------------------------------
# stabilizers and entropies


def g_string(n: int, a: int, b: int) -> PauliOperator:
    """X_a [Z on a+1, a+3, ..., b-1] X_b."""
    return PauliOperator.from_sites(n, x=[a, b], z=range(a + 1, b, 2))


@dataclass
class ReconstructedStabilizerSet:
    operators: list
    grouping: list = field(default_factory=list)


def reconstruct_stabilizers(state: PercolationState) -> ReconstructedStabilizerSet:
    n = state.N
    ops, groups = [], state.clusters()
    for c in groups:
        ops.append(PauliOperator.from_sites(n, z=c))
        ops += [g_string(n, a, b) for a, b in zip(c, c[1:])]
    return ReconstructedStabilizerSet(ops, groups)


def endpoint_pairs(state: PercolationState) -> tuple[np.ndarray, np.ndarray]:
    """0-based (left, right) endpoint columns of the reconstructed generators."""
    lab = state.labels()
    sites = np.arange(state.N)
    order = np.lexsort((sites, lab))
    sl, ss = lab[order], sites[order]
    same = sl[1:] == sl[:-1]
    g_left, g_right = ss[:-1][same], ss[1:][same]
    first = np.ones(state.N, dtype=bool)
    first[1:] = ~same
    last = np.ones(state.N, dtype=bool)
    last[:-1] = ~same
    return (np.concatenate([ss[first], g_left]), np.concatenate([ss[last], g_right]))


def _interval(region, n) -> tuple[int, int]:
    if isinstance(region, tuple) and len(region) == 2:
        a, b = region
    else:
        r = sorted(set(int(s) for s in region))
        if not r:
            return 1, 0
        a, b = r[0], r[-1]
        if b - a + 1 != len(r):
            raise ValueError("region is not contiguous")
    if not (1 <= a and b <= n):
        raise ValueError("region outside the chain")
    return int(a), int(b)


def entropy_from_clusters(state: PercolationState, region) -> int:
    """Entropy of a contiguous region, given as (a, b) or a site collection."""
    a, b = _interval(region, state.N)
    if b < a:
        return 0
    left, right = endpoint_pairs(state)
    return crossing_entropy(left, right, a, b)


def prefix_profile(state: PercolationState) -> np.ndarray:
    """S([1, x]) for x = 1..N-1: clusters with sites on both sides of the cut."""
    return _backend.kernels.prefix_crossings(state.labels())[1:state.N]


def reconstructed_words(state: PercolationState) -> tuple[np.ndarray, np.ndarray]:
    """Bit-packed (x, z) rows of the reconstructed generators."""
    n = state.N
    xb = np.zeros((n, n), dtype=bool)
    zb = np.zeros((n, n), dtype=bool)
    row = 0
    for c in state.clusters():
        zb[row, np.array(c) - 1] = True
        row += 1
        for a, b in zip(c, c[1:]):
            xb[row, [a - 1, b - 1]] = True
            zb[row, a:b - 1:2] = True
            row += 1
    nw = n_words(n)
    pad = nw * WORD - n

    def pack(m):
        m = np.pad(m, ((0, 0), (0, pad)))
        return np.packbits(m, axis=1, bitorder="little").view(np.uint64).reshape(n, nw).copy()

    return pack(xb), pack(zb)


def region_entropy(state: PercolationState, region: Iterable[int], words=None) -> int:
    """Rank-based entropy of any site set from the reconstructed generators."""
    region = sorted(set(int(s) for s in region))
    if not region:
        return 0
    x, z = reconstructed_words(state) if words is None else words
    mask = np.zeros(x.shape[1], dtype=np.uint64)
    for s in region:
        mask[(s - 1) // WORD] |= np.uint64(1) << np.uint64((s - 1) % WORD)
    return int(_backend.kernels.region_rank(x, z, 0, state.N, mask)) - len(region)


def percolation_observables(state: PercolationState, names: Sequence[str]) -> dict:
    n = state.N
    out = {}
    prof = None
    if "profile" in names or "S_half" in names or "S_topo" in names:
        prof = prefix_profile(state)
    if "S_topo" in names:
        A, B, C, D = topo_regions(n)
        s_ab = int(prof[len(A) + len(B) - 1])
        s_b = entropy_from_clusters(state, (B[0], B[-1]))
        s_abc = entropy_from_clusters(state, (D[0], D[-1]))
        s_bc = region_entropy(state, B + C)
        out["S_topo"] = s_topo(s_ab, s_bc, s_b, s_abc)
    if "S_half" in names:
        out["S_half"] = int(prof[n // 2 - 1])
    if "profile" in names:
        out["profile"] = prof
    return out


def check_percolation_config(config: CircuitConfig):
    bad = []
    if config.p_u != 0:
        bad.append("p_u must be 0")
    if config.single_qubit_basis != "Z":
        bad.append("single-qubit basis must be Z")
    if config.periodic:
        bad.append("boundary must be open")
    if config.n_ancillas:
        bad.append("ancilla protocols need the tableau backend")
    if bad:
        raise ValueError("percolation backend: " + "; ".join(bad))


def run_percolation_trajectory(config: CircuitConfig, trajectory_index: int,
                               probes: Probes | None = None,
                               events: str = "circuit") -> TrajectoryRecord:
    """Same event stream and record layout as the tableau trajectory.

    ``events="marginal"`` swaps in the idealized per-lattice marginals
    (sequential updates only), drawn from the same trajectory rng.
    """
    check_percolation_config(config)
    probes = Probes.default(config) if probes is None else probes
    times = sorted(int(t) for t in probes.times)
    if times and (times[0] < 0 or times[-1] > config.t_equil):
        raise ValueError(f"probe time outside [0, {config.t_equil}]")
    seed = config.seed_for(trajectory_index)
    rng = make_rng(seed)
    rec = TrajectoryRecord(config.config_hash(), trajectory_index, seed,
                           config.lineage(trajectory_index))
    names = [o for o in probes.observables if o in CHAIN_OBSERVABLES]
    if events == "circuit":
        block = sample_phase(config, rng, config.t_equil)
    elif events == "marginal":
        if config.schedule != "sequential":
            raise ValueError("marginal events need the sequential schedule")
        block = sample_marginal_events(config.N, config.p_s, rng, config.t_equil * config.N)
    else:
        raise ValueError(f"unknown event source {events!r}")
    st = PercolationState.fresh(config.N)
    eps = config.events_per_step
    pos = 0
    for t in times:
        run_percolation(st, block, pos, t * eps)
        pos = t * eps
        rec.add(t, percolation_observables(st, names))
    run_percolation(st, block, pos, len(block))
    rec.final = {"n_qubits": config.N, "clusters": len(np.unique(st.roots()))}
    return rec


# ---------------------------------------------------------------------------
# standalone samplers


def bond_events(n: int, rows: int, p_t: float, rng, trailing_vertical: bool = False) -> EventBlock:
    """Standard bond percolation rows as events.

    Each row: vertical bonds (absent with prob 1 - p_t -> split), then
    horizontal bonds between j-1 and j+1 for j = 2..N-1 (present with prob
    p_t -> merge). ``trailing_vertical`` appends one more vertical layer,
    which makes the final row match the layered circuit's time step.
    """
    nb = n - 2
    vert = rng.random((rows + int(trailing_vertical), n)) >= p_t
    horiz = rng.random((rows, nb)) < p_t
    kinds = np.full((rows, n + nb), EventKind.NOOP, dtype=np.int8)
    kinds[:, :n][vert[:rows]] = EventKind.SINGLE
    kinds[:, n:][horiz] = EventKind.STABILIZER
    sites = np.broadcast_to(np.concatenate([np.arange(1, n + 1), np.arange(2, n)]), (rows, n + nb))
    kinds, sites = kinds.reshape(-1), sites.reshape(-1)
    if trailing_vertical:
        tail = np.where(vert[rows], EventKind.SINGLE, EventKind.NOOP).astype(np.int8)
        kinds = np.concatenate([kinds, tail])
        sites = np.concatenate([sites, np.arange(1, n + 1)])
    m = kinds.size
    return EventBlock(kinds, sites.astype(np.int32), np.zeros(m, np.int32), np.zeros(m, np.uint8))


def standard_bond_sample(Lsites: int, rows: int, p_t: float, rng,
                         trailing_vertical: bool = False) -> PercolationState:
    st = PercolationState.fresh(Lsites)
    return run_percolation(st, bond_events(Lsites, rows, p_t, rng, trailing_vertical))


def sample_marginal_events(n: int, p_s: float, rng, count: int) -> EventBlock:
    """Updating steps drawn from the idealized per-lattice marginals.

    Each step picks a lattice with probability 1/2, then a single-site
    measurement (prob p_s) on a uniform site of that lattice, otherwise a
    stabilizer on a uniform bond of that lattice.
    """
    if n % 2 or n < 4:
        raise ValueError("chain length must be even and >= 4")
    lat = rng.integers(0, 2, count)          # 0 odd lattice, 1 even lattice
    u = rng.random(count)
    a = rng.integers(0, n // 2, count)
    b = rng.integers(0, n // 2 - 1, count)
    single = u < p_s
    sites = np.where(single, 1 + lat + 2 * a, 2 + lat + 2 * b)
    kinds = np.where(single, EventKind.SINGLE, EventKind.STABILIZER).astype(np.int8)
    return EventBlock(kinds, sites.astype(np.int32), np.zeros(count, np.int32),
                      np.zeros(count, np.uint8))


def profile_and_series(n: int, block: EventBlock, eps: int, series_times: Sequence[int] = ()):
    """Run a block; return (final prefix profile, S_half at each series time)."""
    st = PercolationState.fresh(n)
    pos, series = 0, []
    for t in series_times:
        run_percolation(st, block, pos, t * eps)
        pos = t * eps
        series.append(int(_backend.kernels.prefix_crossings(st.labels())[n // 2]))
    run_percolation(st, block, pos, len(block))
    return prefix_profile(st), np.array(series, dtype=np.int64)
