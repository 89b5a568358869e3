"""Z2 x Z2 symmetry, random Clifford sampling and the duality map.

Gate images are handled in batches as integer patterns: for a k-qubit
Pauli the x bits occupy the low k bits and the z bits the next k bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .clifford import CliffordGate, PauliOperator, StabilizerState, gate_tables, mul_phase


def symmetry_generators(n: int) -> tuple[PauliOperator, PauliOperator]:
    """G1 = prod of Z on even sites, G2 = prod of Z on odd sites."""
    if n < 2 or n % 2:
        raise ValueError("chain length must be even")
    g1 = PauliOperator.from_sites(n, z=range(2, n + 1, 2))
    g2 = PauliOperator.from_sites(n, z=range(1, n + 1, 2))
    return g1, g2


# ---------------------------------------------------------------------------
# batched pattern algebra

def _pc(a):
    return np.bitwise_count(np.asarray(a, dtype=np.uint64)).astype(np.int64)


def _omega(a, b, k):
    lo = (1 << k) - 1
    return (_pc((a & lo) & (b >> k)) + _pc((a >> k) & (b & lo))) & 1


def _pmul(a, sa, b, sb, k):
    """Product of commuting normal-form patterns with sign bits."""
    lo = (1 << k) - 1
    ax, az, bx, bz = a & lo, a >> k, b & lo, b >> k
    cx, cz = ax ^ bx, az ^ bz
    e = (_pc(ax & az) + _pc(bx & bz) + 2 * _pc(az & bx) - _pc(cx & cz)) % 4
    if np.any(e % 2):
        raise ValueError("anticommuting product")
    return a ^ b, sa ^ sb ^ (e >> 1)


@lru_cache(maxsize=4)
def _omega_table(k):
    v = np.arange(1 << (2 * k), dtype=np.int64)
    return (_omega(v[:, None], v[None, :], k) == 1)


def _pick(valid, rng):
    """One uniformly chosen True column per row of ``valid``."""
    counts = valid.sum(axis=1)
    r = (rng.random(valid.shape[0]) * counts).astype(np.int64)
    return np.argmax(np.cumsum(valid, axis=1) > r[:, None], axis=1)


def sample_uniform_patterns(k: int, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """``count`` uniform k-qubit Cliffords as (patterns, sign bits), each (count, 2k).

    Images are chosen in the order X1, Z1, X2, Z2, ...; every image is uniform
    over the Paulis with the required commutation against the earlier ones.
    The number of choices never depends on earlier picks, so the product
    measure is uniform on the symplectic group. Signs are independent bits.
    """
    if k not in (1, 2, 3):
        raise ValueError("arity must be 1, 2 or 3")
    cand = np.arange(1 << (2 * k), dtype=np.int64)
    om = _omega_table(k)
    pats = np.zeros((count, 2 * k), dtype=np.int64)
    chosen = []
    for j in range(k):
        for role in ("x", "z"):
            valid = np.ones((count, cand.size), dtype=bool)
            valid[:, 0] = False
            for prev in chosen:
                valid &= ~om[prev]
            if role == "z":
                valid &= om[xj]
            pick = cand[_pick(valid, rng)]
            if role == "x":
                xj = pick
            else:
                chosen += [xj, pick]
                pats[:, j] = xj
                pats[:, k + j] = pick
    signs = rng.integers(0, 2, size=(count, 2 * k))
    return pats, signs.astype(np.int64)


def sample_uniform_clifford(k: int, rng) -> CliffordGate:
    pats, signs = sample_uniform_patterns(k, 1, rng)
    return CliffordGate.from_patterns(k, pats[0], signs[0])


# 3-qubit patterns of the local symmetry operators
Z2_PAT = 1 << 4
Z1Z3_PAT = (1 << 3) | (1 << 5)


def symmetric_mask(pats, signs) -> np.ndarray:
    """Which gates map Z2 -> +Z2 and Z1Z3 -> +Z1Z3."""
    pats, signs = np.atleast_2d(pats), np.atleast_2d(signs)
    ok2 = (pats[:, 4] == Z2_PAT) & (signs[:, 4] == 0)
    p13, s13 = _pmul(pats[:, 3], signs[:, 3], pats[:, 5], signs[:, 5], 3)
    return ok2 & (p13 == Z1Z3_PAT) & (s13 == 0)


def sample_symmetric_patterns(count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples from the subgroup fixing +Z2 and +Z1Z3.

    Works in the symplectic basis (b1, a1) = (X2, Z2), (b2, a2) = (X1, Z1Z3),
    (b3, a3) = (X1X3, Z3). a1, a2 stay fixed; b1, b2, a3, b3 are picked in
    turn, uniformly among the admissible Paulis (16, 8, 3, 2 choices), with
    uniform signs. Rejection sampling gives the same law 7560 times slower.
    """
    k = 3
    cand = np.arange(64, dtype=np.int64)
    a1 = np.full(count, Z2_PAT)
    a2 = np.full(count, Z1Z3_PAT)

    om = _omega_table(k)

    def draw(conds):
        valid = np.ones((count, 64), dtype=bool)
        valid[:, 0] = False
        for img, want in conds:
            valid &= om[img] if want else ~om[img]
        return cand[_pick(valid, rng)]

    b1 = draw([(a1, 1), (a2, 0)])
    b2 = draw([(a1, 0), (a2, 1), (b1, 0)])
    a3 = draw([(a1, 0), (a2, 0), (b1, 0), (b2, 0)])
    b3 = draw([(a1, 0), (a2, 0), (b1, 0), (b2, 0), (a3, 1)])
    sb = rng.integers(0, 2, size=(count, 4)).astype(np.int64)
    s_b1, s_b2, s_a3, s_b3 = sb.T
    zero = np.zeros(count, dtype=np.int64)
    z1, s_z1 = _pmul(a2, zero, a3, s_a3, k)
    x3, s_x3 = _pmul(b2, s_b2, b3, s_b3, k)
    pats = np.stack([b2, b1, x3, z1, a1, a3], axis=1)
    signs = np.stack([s_b2, s_b1, s_x3, s_z1, zero, s_a3], axis=1)
    return pats, signs


def sample_symmetric_rejection(count: int, rng, batch: int = 200_000):
    """Same law as ``sample_symmetric_patterns`` by rejection from the full group.

    Returns (patterns, signs, draws used).
    """
    got_p, got_s, used, n = [], [], 0, 0
    while n < count:
        p, s = sample_uniform_patterns(3, batch, rng)
        m = symmetric_mask(p, s)
        got_p.append(p[m])
        got_s.append(s[m])
        used += batch
        n += int(m.sum())
    return np.concatenate(got_p)[:count], np.concatenate(got_s)[:count], used


def is_symmetric(gate: CliffordGate) -> bool:
    if gate.arity != 3:
        raise ValueError("symmetry condition is defined for 3-qubit gates")
    z2 = PauliOperator.from_string("IZI")
    z13 = PauliOperator.from_string("ZIZ")
    return gate.conjugate(z2) == z2 and gate.conjugate(z13) == z13


@dataclass(frozen=True)
class SymmetricGatePool:
    patterns: np.ndarray
    signs: np.ndarray
    source_seed: int | None = None
    tables: np.ndarray = field(repr=False, default=None)

    @property
    def pool_size(self) -> int:
        return len(self.patterns)

    @cached_property
    def gates(self) -> list[CliffordGate]:
        return [CliffordGate.from_patterns(3, p, s) for p, s in zip(self.patterns, self.signs)]

    def __len__(self):
        return self.pool_size


def build_symmetric_pool(pool_size: int = 4096, rng=0, method: str = "conditional") -> SymmetricGatePool:
    """i.i.d. uniform symmetric 3-qubit gates. ``rng`` may be a seed or a Generator."""
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.Generator(np.random.PCG64(seed))
    if method == "conditional":
        pats, signs = sample_symmetric_patterns(pool_size, rng)
    elif method == "rejection":
        pats, signs, _ = sample_symmetric_rejection(pool_size, rng)
    else:
        raise ValueError(f"unknown method {method!r}")
    tables = gate_tables(pats, signs, 3)
    return SymmetricGatePool(pats, signs, seed, tables)


@lru_cache(maxsize=8)
def cached_pool(pool_size: int = 4096, seed: int = 0) -> SymmetricGatePool:
    return build_symmetric_pool(pool_size, seed)


def uniform_tables(count: int, rng) -> np.ndarray:
    """Lookup tables for ``count`` uniform 3-qubit Cliffords (scrambler gates)."""
    pats, signs = sample_uniform_patterns(3, count, rng)
    return gate_tables(pats, signs, 3)


# ---------------------------------------------------------------------------
# duality

def _dual_images(n):
    ximg = [PauliOperator(n, 1 << q, 0) for q in range(n)]
    zimg = []
    for q in range(n):
        x = (1 << ((q - 1) % n)) ^ (1 << ((q + 1) % n))
        zimg.append(PauliOperator(n, x, 1 << q))
    return ximg, zimg


def conjugate_by_images(p: PauliOperator, ximg, zimg) -> PauliOperator:
    """Image of ``p`` under the Clifford with the given X_q / Z_q images."""
    n = p.n_qubits
    ax = az = 0
    e = bin(p.x & p.z).count("1") + (2 if p.sign < 0 else 0)
    factors = [ximg[q] for q in range(n) if (p.x >> q) & 1]
    factors += [zimg[q] for q in range(n) if (p.z >> q) & 1]
    for b in factors:
        e += mul_phase(ax, az, b.x, b.z) + (2 if b.sign < 0 else 0)
        ax ^= b.x
        az ^= b.z
    e %= 4
    if e % 2:
        raise ValueError("image is not Hermitian")
    return PauliOperator(n, ax, az, -1 if e == 2 else 1)


def dual_pauli(p: PauliOperator) -> PauliOperator:
    """U_d p U_d^dagger with X_i -> X_i, Z_i -> X_{i-1} Z_i X_{i+1} (periodic)."""
    ximg, zimg = _dual_images(p.n_qubits)
    return conjugate_by_images(p, ximg, zimg)


def duality_transform(state: StabilizerState) -> StabilizerState:
    if state.n_qubits % 2:
        raise ValueError("chain length must be even")
    ximg, zimg = _dual_images(state.n_qubits)
    return StabilizerState.from_generators([conjugate_by_images(g, ximg, zimg)
                                           for g in state.generators])
