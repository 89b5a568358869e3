"""Trajectory-averaged dynamics on mixed stabilizer states.

A group G with n <= N generators stands for rho = 2^-N sum_{g in G} g.
Averaging a measurement of S over outcomes maps rho(G) to rho(C_G(S)),
which drops exactly one generator when S anticommutes with some of them.
Unitaries conjugate the generators and keep n fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .circuits import CircuitConfig, _pool_tables, make_rng, sample_phase
from .clifford import (CliffordGate, PauliOperator, _check_sites, mul_phase, n_words,
                       int_to_words, words_to_int, generator_rank)
from .symmetry import SymmetricGatePool, symmetry_generators


class StabilizerGroupState:
    """Rows ``0..n-1`` of ``x``/``z``/``r`` are the current generators."""

    def __init__(self, n_qubits: int, x, z, r, n: int):
        self.n_qubits = n_qubits
        self.x, self.z, self.r = x, z, r
        self.n = n

    @classmethod
    def from_generators(cls, gens: Sequence[PauliOperator], n_qubits: int | None = None):
        n_qubits = gens[0].n_qubits if n_qubits is None else n_qubits
        if len(gens) > n_qubits:
            raise ValueError("more generators than qubits")
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                if not a.commutes(b):
                    raise ValueError(f"{a} and {b} anticommute")
        nw = n_words(n_qubits)
        x = np.zeros((n_qubits, nw), dtype=np.uint64)
        z = np.zeros((n_qubits, nw), dtype=np.uint64)
        r = np.zeros(n_qubits, dtype=np.uint8)
        for i, g in enumerate(gens):
            x[i], z[i] = g.words(nw)
            r[i] = 0 if g.sign > 0 else 1
        if gens and generator_rank(x[:len(gens)], z[:len(gens)]) != len(gens):
            raise ValueError("generators are not independent")
        return cls(n_qubits, x, z, r, len(gens))

    @property
    def generators(self) -> list[PauliOperator]:
        return [PauliOperator(self.n_qubits, words_to_int(self.x[i]), words_to_int(self.z[i]),
                              -1 if self.r[i] else 1) for i in range(self.n)]

    def copy(self) -> "StabilizerGroupState":
        return StabilizerGroupState(self.n_qubits, self.x.copy(), self.z.copy(), self.r.copy(), self.n)

    def __repr__(self):
        return f"StabilizerGroupState(n={self.n}, {', '.join(map(str, self.generators))})"


def initial_group(N: int) -> StabilizerGroupState:
    """|0...0> written as <G1, G2, Z_2, ..., Z_{N-1}>."""
    g1, g2 = symmetry_generators(N)
    zs = [PauliOperator.from_sites(N, z=[i]) for i in range(2, N)]
    return StabilizerGroupState.from_generators([g1, g2] + zs)


def channel_measure(group: StabilizerGroupState, p: PauliOperator) -> StabilizerGroupState:
    px, pz = p.words(group.x.shape[1])
    group.n = int(_backend.kernels.channel_measure_words(group.x, group.z, group.r, group.n, px, pz))
    return group


def channel_unitary(group: StabilizerGroupState, gate: CliffordGate, sites) -> StabilizerGroupState:
    cols = _check_sites(group.n_qubits, sites)
    if len(cols) != gate.arity:
        raise ValueError("site count does not match gate arity")
    n = group.n
    if n:
        x, z, r = group.x[:n].copy(), group.z[:n].copy(), group.r[:n].copy()
        _backend.kernels.apply_gate(x, z, r, cols, gate.table)
        group.x[:n], group.z[:n], group.r[:n] = x, z, r
    return group


def group_sign(group: StabilizerGroupState, p: PauliOperator) -> int:
    """+1 / -1 if +p / -p is in the group, 0 if p is not in its span."""
    rows = [(words_to_int(group.x[i]), words_to_int(group.z[i]), int(group.r[i]), 1 << i)
            for i in range(group.n)]
    basis = []  # (pivot, x, z, combo)
    for x, z, _, c in rows:
        v = x | (z << group.n_qubits)
        for piv, bv, bc in basis:
            if (v >> piv) & 1:
                v ^= bv
                c ^= bc
        if v:
            basis.append((v.bit_length() - 1, v, c))
    v = p.x | (p.z << group.n_qubits)
    combo = 0
    for piv, bv, bc in basis:
        if (v >> piv) & 1:
            v ^= bv
            combo ^= bc
    if v:
        return 0
    ax = az = 0
    e = 0
    for i, (x, z, s, _) in enumerate(rows):
        if (combo >> i) & 1:
            e += mul_phase(ax, az, x, z) + 2 * s
            ax ^= x
            az ^= z
    return (1 if e % 4 == 0 else -1) * p.sign


def is_steady_state(group: StabilizerGroupState) -> bool:
    """True iff the group is exactly <+G1, +G2>."""
    if group.n != 2:
        return False
    g1, g2 = symmetry_generators(group.n_qubits)
    return group_sign(group, g1) == 1 and group_sign(group, g2) == 1


@dataclass(frozen=True)
class TauResult:
    tau: float          # updating steps / events per time step
    time_steps: int     # ceil of tau
    events: int
    censored: bool
    final_n: int


def time_to_steady(config: CircuitConfig, rng=None, trajectory_index: int = 0,
                   pool: SymmetricGatePool | None = None,
                   cap_steps: int | None = None) -> TauResult:
    """Run the channel on the circuit's event stream until it reaches <G1, G2>.

    The stream comes in blocks of t_equil time steps from the trajectory rng,
    so the first block is exactly the one a circuit trajectory would see.
    """
    N = config.N
    cap_steps = 100 * N if cap_steps is None else cap_steps
    rng = make_rng(config.seed_for(trajectory_index)) if rng is None else rng
    tables = pool.tables if pool is not None else _pool_tables(config, None)
    eps = config.events_per_step
    group = initial_group(N)
    done_events = 0
    chunk = max(1, min(config.t_equil or 1, cap_steps))
    stop_at = 2
    steady = False
    while done_events < cap_steps * eps:
        steps = min(chunk, cap_steps - done_events // eps)
        block = sample_phase(config, rng, steps)
        n, e = _backend.kernels.channel_run_events(
            group.x, group.z, group.r, group.n, block.kinds, block.sites, block.gates, tables,
            0, len(block), N, config.single_qubit_basis == "X", config.periodic, stop_at)
        group.n = int(n)
        done_events += int(e)
        if group.n <= 2 and stop_at >= 0:
            if is_steady_state(group):
                steady = True
                break
            stop_at = -1  # can never become steady again; burn to the cap
    tau = done_events / eps
    return TauResult(tau, int(np.ceil(tau)), done_events, not steady, group.n)
