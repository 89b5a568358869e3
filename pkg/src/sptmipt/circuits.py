"""Random symmetric circuit dynamics and trajectory execution.

One updating step picks a unitary (prob p_u), a single-qubit measurement
(prob p_s) or a stabilizer measurement X_{i-1} Z_i X_{i+1} (prob p_t). A time
step is N updating steps in the sequential schedule; in the layered
schedule it is one stabilizer layer followed by one single-qubit layer.

Event streams are drawn a whole phase at a time, so the same seed gives the
same events no matter which backend (tableau, percolation, channel)
consumes them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import _backend
from .analysis import s_topo, topo_regions
from .clifford import (StabilizerState, clipped_endpoints, entanglement_entropy, n_words,
                       words_to_int)
from .symmetry import SymmetricGatePool, cached_pool, uniform_tables

MASK64 = (1 << 64) - 1
N_ANCILLAS = {"none": 0, "plain": 1, "scrambled": 10}


class EventKind(IntEnum):
    UNITARY = 0
    SINGLE = 1
    STABILIZER = 2
    NOOP = 3


# ---------------------------------------------------------------------------
# seeds

def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(a: int, b: int) -> int:
    """Stable 64-bit mix: splitmix64(a xor splitmix64(b))."""
    return splitmix64((a & MASK64) ^ splitmix64(b & MASK64))


def point_seed(master_seed: int, L: int, p_s: float, p_u: float) -> int:
    key = f"{int(L)}|{float(p_s)!r}|{float(p_u)!r}".encode()
    h = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
    return mix64(master_seed, h)


def trajectory_seed(pseed: int, index: int) -> int:
    return mix64(pseed, index)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class CircuitConfig:
    N: int
    p_s: float
    p_u: float = 0.0
    schedule: str = "sequential"
    single_qubit_basis: str = "Z"
    boundary: str = "open"
    t_equil: int | None = None
    ancilla_protocol: str = "none"
    t_probe: int | None = None
    master_seed: int = 0
    pool_size: int = 4096
    pool_seed: int = 0

    def __post_init__(self):
        if self.t_equil is None:
            object.__setattr__(self, "t_equil", 2 * self.N)
        if self.t_probe is None:
            object.__setattr__(self, "t_probe", self.N)
        errs = self.violations()
        if errs:
            raise ValueError("; ".join(errs))

    def violations(self) -> list[str]:
        out = []
        if self.N < 4 or self.N % 2:
            out.append("N must be an even integer >= 4")
        for name in ("p_s", "p_u"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                out.append(f"{name} outside [0, 1]")
        if self.p_s + self.p_u > 1.0 + 1e-12:
            out.append("p_s+p_u>1")
        if self.schedule not in ("sequential", "layered"):
            out.append(f"unknown schedule {self.schedule!r}")
        if self.schedule == "layered" and self.p_u != 0:
            out.append("layered schedule requires p_u=0")
        if self.single_qubit_basis not in ("Z", "X"):
            out.append("single_qubit_basis must be Z or X")
        if self.boundary not in ("open", "periodic"):
            out.append("boundary must be open or periodic")
        if self.ancilla_protocol not in N_ANCILLAS:
            out.append(f"unknown ancilla protocol {self.ancilla_protocol!r}")
        if self.t_equil < 0 or self.t_probe < 0:
            out.append("times must be non-negative")
        if self.pool_size < 1:
            out.append("pool_size must be >= 1")
        return out

    @property
    def p_t(self) -> float:
        return max(0.0, 1.0 - self.p_s - self.p_u)

    @property
    def n_ancillas(self) -> int:
        return N_ANCILLAS[self.ancilla_protocol]

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def n_bulk(self) -> int:
        return self.N if self.periodic else self.N - 2

    @property
    def events_per_step(self) -> int:
        if self.schedule == "layered":
            return self.n_bulk + self.N
        return self.N

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def seed_for(self, index: int) -> int:
        return trajectory_seed(point_seed(self.master_seed, self.N, self.p_s, self.p_u), index)

    def lineage(self, index: int) -> str:
        ps = point_seed(self.master_seed, self.N, self.p_s, self.p_u)
        return f"{self.master_seed:x}/{ps:016x}/{trajectory_seed(ps, index):016x}"


@dataclass(frozen=True)
class CircuitEvent:
    kind: EventKind
    site: int
    gate_index: int | None = None
    outcome_bit: int = 0


@dataclass
class EventBlock:
    """Struct-of-arrays event stream."""

    kinds: np.ndarray
    sites: np.ndarray
    gates: np.ndarray
    bits: np.ndarray

    def __len__(self):
        return len(self.kinds)

    def __getitem__(self, i: int) -> CircuitEvent:
        kind = EventKind(int(self.kinds[i]))
        gate = int(self.gates[i]) if kind == EventKind.UNITARY else None
        return CircuitEvent(kind, int(self.sites[i]), gate, int(self.bits[i]))

    @classmethod
    def from_events(cls, events: Sequence[CircuitEvent]) -> "EventBlock":
        return cls(np.array([e.kind for e in events], dtype=np.int8),
                   np.array([e.site for e in events], dtype=np.int32),
                   np.array([e.gate_index or 0 for e in events], dtype=np.int32),
                   np.array([e.outcome_bit for e in events], dtype=np.uint8))


def sample_events(config: CircuitConfig, rng, n: int) -> EventBlock:
    """``n`` sequential-schedule updating steps."""
    N = config.N
    u = rng.random(n)
    a = rng.integers(0, N * config.n_bulk, n)
    nb = 2 * config.pool_size if config.p_u > 0 else 2
    b = rng.integers(0, nb, n)
    kinds = np.where(u < config.p_u, EventKind.UNITARY,
                     np.where(u < config.p_u + config.p_s, EventKind.SINGLE, EventKind.STABILIZER))
    first_bulk = 1 if config.periodic else 2
    sites = np.where(kinds == EventKind.SINGLE, 1 + a % N, first_bulk + a // N)
    return EventBlock(kinds.astype(np.int8), sites.astype(np.int32),
                      (b >> 1).astype(np.int32), (b & 1).astype(np.uint8))


def sample_event(config: CircuitConfig, rng) -> CircuitEvent:
    if config.schedule != "sequential":
        raise ValueError("sample_event needs the sequential schedule")
    return sample_events(config, rng, 1)[0]


def sample_layered(config: CircuitConfig, rng, steps: int) -> EventBlock:
    """``steps`` layered time steps, absent measurements encoded as no-ops.

    Per step: stabilizer layer over the bulk sites in ascending order, then the
    single-qubit layer over 1..N in ascending order.
    """
    N, nb = config.N, config.n_bulk
    stab = rng.random((steps, nb)) < config.p_t
    single = rng.random((steps, N)) < 1.0 - config.p_t
    bits = rng.integers(0, 2, size=(steps, nb + N))
    first_bulk = 1 if config.periodic else 2
    kinds = np.concatenate([np.where(stab, EventKind.STABILIZER, EventKind.NOOP),
                            np.where(single, EventKind.SINGLE, EventKind.NOOP)], axis=1)
    sites = np.concatenate([np.broadcast_to(np.arange(first_bulk, first_bulk + nb), (steps, nb)),
                            np.broadcast_to(np.arange(1, N + 1), (steps, N))], axis=1)
    return EventBlock(kinds.reshape(-1).astype(np.int8), sites.reshape(-1).astype(np.int32),
                      np.zeros(steps * (nb + N), dtype=np.int32),
                      bits.reshape(-1).astype(np.uint8))


def sample_phase(config: CircuitConfig, rng, steps: int) -> EventBlock:
    if config.schedule == "layered":
        return sample_layered(config, rng, steps)
    return sample_events(config, rng, steps * config.N)


# ---------------------------------------------------------------------------
# applying events

def _pool_tables(config: CircuitConfig, pool: SymmetricGatePool | None):
    if pool is None:
        if config.p_u == 0:
            return np.zeros((1, 64), dtype=np.uint16)
        pool = cached_pool(config.pool_size, config.pool_seed)
    return pool.tables


def check_event(event: CircuitEvent, config: CircuitConfig, pool=None):
    N = config.N
    lo, hi = (1, N) if config.periodic else (2, N - 1)
    if event.kind == EventKind.SINGLE:
        if not 1 <= event.site <= N:
            raise ValueError(f"single event site {event.site} outside 1..{N}")
    elif event.kind in (EventKind.UNITARY, EventKind.STABILIZER):
        if not lo <= event.site <= hi:
            raise ValueError(f"event site {event.site} outside {lo}..{hi}")
        if event.kind == EventKind.UNITARY:
            size = config.pool_size if pool is None else pool.pool_size
            if event.gate_index is None or not 0 <= event.gate_index < size:
                raise ValueError("unitary event needs a gate index into the pool")


def run_block(state: StabilizerState, block: EventBlock, config: CircuitConfig, tables,
              start: int = 0, stop: int | None = None) -> StabilizerState:
    stop = len(block) if stop is None else stop
    _backend.kernels.run_events(state.x, state.z, state.r, state.n_qubits, block.kinds,
                                block.sites, block.gates, block.bits, tables, start, stop,
                                config.N, config.single_qubit_basis == "X", config.periodic)
    return state


def apply_event(state: StabilizerState, event: CircuitEvent, config: CircuitConfig,
                pool: SymmetricGatePool | None = None) -> StabilizerState:
    check_event(event, config, pool)
    if event.kind == EventKind.UNITARY and config.p_u == 0 and pool is None:
        pool = cached_pool(config.pool_size, config.pool_seed)
    tables = pool.tables if pool is not None else _pool_tables(config, None)
    return run_block(state, EventBlock.from_events([event]), config, tables)


def layered_step(state: StabilizerState, config: CircuitConfig, rng) -> StabilizerState:
    if config.schedule != "layered":
        raise ValueError("layered_step needs the layered schedule")
    return run_block(state, sample_layered(config, rng, 1), config, _pool_tables(config, None))


# ---------------------------------------------------------------------------
# ancillas

def ancilla_stabilizers(n: int):
    """Z_{N/2-1} Z_a, Z_{N/2+1} Z_a, X_{N/2-1} X_a X_{N/2+1} on N + 1 qubits."""
    from .clifford import PauliOperator
    a, l, r = n + 1, n // 2 - 1, n // 2 + 1
    return [PauliOperator.from_sites(n + 1, z=[l, a]),
            PauliOperator.from_sites(n + 1, z=[r, a]),
            PauliOperator.from_sites(n + 1, x=[l, a, r])]


def entangle_ancilla(state: StabilizerState, rng, n_chain: int | None = None) -> StabilizerState:
    """Append one ancilla and measure the three entangling stabilizers in order."""
    n = state.n_qubits if n_chain is None else n_chain
    if state.n_qubits == n:
        state = state.append_qubits(1)
    bits = rng.integers(0, 2, 3)
    nw = state.x.shape[1]
    for p, bit in zip(ancilla_stabilizers(n), bits):
        px, pz = p.words(nw)
        _backend.kernels.measure_words(state.x, state.z, state.r, state.n_qubits, px, pz, int(bit))
    return state


def entangle_scrambled_ancillas(state: StabilizerState, rng, n_anc: int = 10,
                                time_steps: int = 10) -> StabilizerState:
    """Append ``n_anc`` ancillas then scramble chain + ancillas with uniform random gates.

    Each of the ``time_steps * (N + n_anc)`` updating steps acts on 3 distinct
    qubits drawn uniformly without replacement.
    """
    state = state.append_qubits(n_anc)
    m = state.n_qubits
    steps = time_steps * m
    tables = uniform_tables(steps, rng)
    triples = np.argsort(rng.random((steps, m)), axis=1)[:, :3]
    for s in range(steps):
        _backend.kernels.apply_gate(state.x, state.z, state.r, triples[s], tables[s])
    return state


# ---------------------------------------------------------------------------
# observables and trajectories

CHAIN_OBSERVABLES = ("S_topo", "S_half", "profile")


def ancilla_observable(config: CircuitConfig) -> str | None:
    return {"none": None, "plain": "S_a", "scrambled": "S_a_tilde"}[config.ancilla_protocol]


def tableau_observables(state: StabilizerState, n: int, names: Sequence[str]) -> dict:
    out = {}
    if "S_topo" in names:
        A, B, C, _ = topo_regions(n)
        ent = lambda r: entanglement_entropy(state, r)
        out["S_topo"] = s_topo(ent(A + B), ent(B + C), ent(B), ent(A + B + C))
    if "S_half" in names:
        out["S_half"] = entanglement_entropy(state, range(1, n // 2 + 1))
    if "profile" in names:
        left, right = clipped_endpoints(state)
        xs = np.arange(1, n)
        prof = np.count_nonzero((left[None, :] < xs[:, None]) ^ (right[None, :] < xs[:, None]), axis=1) // 2
        out["profile"] = prof
    for name in ("S_a", "S_a_tilde"):
        if name in names and state.n_qubits > n:
            out[name] = entanglement_entropy(state, range(n + 1, state.n_qubits + 1))
    return out


@dataclass
class TrajectoryRecord:
    config_hash: str
    trajectory: int
    seed: int
    lineage: str
    rows: list = field(default_factory=list)  # (t, observable, value)
    final: dict = field(default_factory=dict)

    def add(self, t: int, values: dict):
        for name, v in values.items():
            if name == "profile":
                for x, s in enumerate(v, start=1):
                    self.rows.append((t, f"S[{x}]", int(s)))
            else:
                self.rows.append((t, name, v if isinstance(v, float) else int(v)))

    def get(self, name: str, t: int | None = None):
        vals = [(tt, v) for tt, n, v in self.rows if n == name and (t is None or tt == t)]
        if not vals:
            raise KeyError((name, t))
        return vals[-1][1]

    def profile(self, t: int, n: int) -> np.ndarray:
        d = {nm: v for tt, nm, v in self.rows if tt == t and nm.startswith("S[")}
        return np.array([d[f"S[{x}]"] for x in range(1, n)])

    def to_json(self) -> dict:
        return {"config_hash": self.config_hash, "trajectory": self.trajectory,
                "seed": self.seed, "lineage": self.lineage,
                "rows": [list(r) for r in self.rows], "final": self.final}

    @classmethod
    def from_json(cls, d: dict) -> "TrajectoryRecord":
        return cls(d["config_hash"], d["trajectory"], d["seed"], d["lineage"],
                   [tuple(r) for r in d["rows"]], d.get("final", {}))


@dataclass(frozen=True)
class Probes:
    """Probe times (time steps since the start) and observables to record there."""

    times: tuple = ()
    observables: tuple = ("S_topo", "S_half")

    @classmethod
    def default(cls, config: CircuitConfig) -> "Probes":
        anc = ancilla_observable(config)
        if anc is None:
            return cls((config.t_equil,), ("S_topo", "S_half"))
        return cls((config.t_equil + config.t_probe,), ("S_topo", "S_half", anc))


def horizon(config: CircuitConfig) -> int:
    return config.t_equil + (config.t_probe if config.n_ancillas else 0)


def state_digest(state: StabilizerState) -> str:
    n = state.n_qubits
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(state.x[n:]).tobytes())
    h.update(np.ascontiguousarray(state.z[n:]).tobytes())
    h.update(np.ascontiguousarray(state.r[n:]).tobytes())
    return h.hexdigest()[:16]


def run_trajectory(config: CircuitConfig, trajectory_index: int,
                   pool: SymmetricGatePool | None = None,
                   probes: Probes | None = None) -> TrajectoryRecord:
    """One trajectory from |0...0>, deterministic in (master_seed, index)."""
    probes = Probes.default(config) if probes is None else probes
    times = sorted(int(t) for t in probes.times)
    if times and (times[0] < 0 or times[-1] > horizon(config)):
        raise ValueError(f"probe time outside [0, {horizon(config)}]")
    N = config.N
    seed = config.seed_for(trajectory_index)
    rng = make_rng(seed)
    tables = pool.tables if pool is not None else _pool_tables(config, None)
    rec = TrajectoryRecord(config.config_hash(), trajectory_index, seed,
                           config.lineage(trajectory_index))
    chain_names = [o for o in probes.observables if o in CHAIN_OBSERVABLES]
    anc_names = [o for o in probes.observables if o in ("S_a", "S_a_tilde")]
    state = StabilizerState.zero(N)
    eps = config.events_per_step

    def evolve(block, t0, t1, window):
        nonlocal state
        pos = 0
        for t in [t for t in times if window(t)]:
            stop = (t - t0) * eps
            run_block(state, block, config, tables, pos, stop)
            pos = stop
            names = chain_names + (anc_names if state.n_qubits > N else [])
            rec.add(t, tableau_observables(state, N, names))
        run_block(state, block, config, tables, pos, len(block))

    block = sample_phase(config, rng, config.t_equil)
    evolve(block, 0, config.t_equil, lambda t: t <= config.t_equil)
    if config.n_ancillas:
        if config.ancilla_protocol == "plain":
            state = entangle_ancilla(state, rng, N)
        else:
            state = entangle_scrambled_ancillas(state, rng, config.n_ancillas)
        block = sample_phase(config, rng, config.t_probe)
        evolve(block, config.t_equil, horizon(config), lambda t: t > config.t_equil)
    rec.final = {"n_qubits": state.n_qubits, "digest": state_digest(state)}
    return rec


def final_state(config: CircuitConfig, trajectory_index: int,
                pool: SymmetricGatePool | None = None) -> StabilizerState:
    """The chain state at t_equil for trajectory ``trajectory_index`` (no ancillas)."""
    rng = make_rng(config.seed_for(trajectory_index))
    tables = pool.tables if pool is not None else _pool_tables(config, None)
    state = StabilizerState.zero(config.N)
    return run_block(state, sample_phase(config, rng, config.t_equil), config, tables)
