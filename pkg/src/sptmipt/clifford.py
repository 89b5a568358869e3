"""Pauli strings and stabilizer tableaux over GF(2).

Sites are labelled ``1..N`` everywhere in the public API; bit ``q - 1`` of a
mask stands for site ``q``. A pure state keeps a full Aaronson-Gottesman
tableau (destabilizers next to stabilizers) so that deterministic
measurement outcomes cost O(N) words instead of an elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _backend

WORD = 64


def n_words(n_qubits: int) -> int:
    return max(1, -(-n_qubits // WORD))


def _popcount(v: int) -> int:
    return bin(v).count("1")


def mul_phase(ax: int, az: int, bx: int, bz: int) -> int:
    """Power of ``i`` in ``P(a) P(b) = i^e P(a ^ b)`` for normal-form Paulis."""
    cx, cz = ax ^ bx, az ^ bz
    return (_popcount(ax & az) + _popcount(bx & bz) + 2 * _popcount(az & bx)
            - _popcount(cx & cz)) % 4


def int_to_words(v: int, nw: int) -> np.ndarray:
    return np.array([(v >> (WORD * w)) & 0xFFFFFFFFFFFFFFFF for w in range(nw)], dtype=np.uint64)


def words_to_int(words: np.ndarray) -> int:
    out = 0
    for w, val in enumerate(words):
        out |= int(val) << (WORD * w)
    return out


def sites_mask(sites: Iterable[int], n_qubits: int) -> int:
    mask = 0
    for s in sites:
        s = int(s)
        if not 1 <= s <= n_qubits:
            raise ValueError(f"site {s} outside 1..{n_qubits}")
        mask |= 1 << (s - 1)
    return mask


@dataclass(frozen=True)
class PauliOperator:
    """A signed Pauli string ``sign * i^{|x&z|} X^x Z^z``."""

    n_qubits: int
    x: int = 0
    z: int = 0
    sign: int = 1

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        top = 1 << self.n_qubits
        if self.x < 0 or self.z < 0 or self.x >= top or self.z >= top:
            raise ValueError("mask has bits outside the register")

    @classmethod
    def from_string(cls, text: str) -> "PauliOperator":
        """Parse ``"+XZ_Y"``-style strings; ``I`` and ``_`` are identity."""
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        x = z = 0
        for q, ch in enumerate(text.upper()):
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
            if ch not in "IXYZ_":
                raise ValueError(f"bad Pauli character {ch!r}")
        return cls(len(text), x, z, sign)

    @classmethod
    def from_sites(cls, n_qubits: int, x: Iterable[int] = (), z: Iterable[int] = (),
                   y: Iterable[int] = (), sign: int = 1) -> "PauliOperator":
        ys = sites_mask(y, n_qubits)
        return cls(n_qubits, sites_mask(x, n_qubits) ^ ys, sites_mask(z, n_qubits) ^ ys, sign)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliOperator":
        return cls(n_qubits)

    def commutes(self, other: "PauliOperator") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        if other.n_qubits != self.n_qubits:
            raise ValueError("register size mismatch")
        e = mul_phase(self.x, self.z, other.x, other.z)
        if e % 2:
            raise ValueError("product of anticommuting Paulis is not Hermitian")
        sign = self.sign * other.sign * (-1 if e == 2 else 1)
        return PauliOperator(self.n_qubits, self.x ^ other.x, self.z ^ other.z, sign)

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, self.x, self.z, -self.sign)

    @property
    def unsigned(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, self.x, self.z, 1)

    @property
    def support(self) -> list[int]:
        m = self.x | self.z
        return [q + 1 for q in range(self.n_qubits) if (m >> q) & 1]

    def words(self, nw: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        nw = n_words(self.n_qubits) if nw is None else nw
        return int_to_words(self.x, nw), int_to_words(self.z, nw)

    def embed(self, n_qubits: int, sites: Sequence[int]) -> "PauliOperator":
        """Place this operator on ``sites`` (1-based) of a larger register."""
        x = z = 0
        for j, s in enumerate(sites):
            x |= ((self.x >> j) & 1) << (s - 1)
            z |= ((self.z >> j) & 1) << (s - 1)
        return PauliOperator(n_qubits, x, z, self.sign)

    def __str__(self) -> str:
        chars = "IXZY"
        body = "".join(chars[((self.x >> q) & 1) | (((self.z >> q) & 1) << 1)]
                       for q in range(self.n_qubits))
        return ("+" if self.sign > 0 else "-") + body


# ---------------------------------------------------------------------------
# Clifford gates

def gate_tables(images: np.ndarray, signs: np.ndarray, k: int) -> np.ndarray:
    """Conjugation lookup tables for a batch of k-qubit Cliffords.

    ``images[b, j]`` is the 2k-bit pattern (x bits low) of the image of basis
    Pauli ``j`` (``X_1..X_k`` then ``Z_1..Z_k``) and ``signs[b, j]`` its sign
    bit. Entry ``v`` of the returned table holds the image pattern of the
    normal-form Pauli ``v`` plus its sign bit at position ``2k``.
    """
    images = np.asarray(images, dtype=np.int64)
    signs = np.asarray(signs, dtype=np.int64)
    batch = images.shape[0]
    lo = (1 << k) - 1
    size = 1 << (2 * k)
    pat = np.zeros((batch, size), dtype=np.int64)
    ph = np.zeros((batch, size), dtype=np.int64)

    def pc(a):
        return np.bitwise_count(a.astype(np.uint64)).astype(np.int64)

    for v in range(1, size):
        top = v.bit_length() - 1
        prev = v ^ (1 << top)
        ax, az = pat[:, prev] & lo, pat[:, prev] >> k
        bx, bz = images[:, top] & lo, images[:, top] >> k
        cx, cz = ax ^ bx, az ^ bz
        e = pc(ax & az) + pc(bx & bz) + 2 * pc(az & bx) - pc(cx & cz)
        pat[:, v] = cx | (cz << k)
        ph[:, v] = ph[:, prev] + 2 * signs[:, top] + e
    v = np.arange(size)
    ph = (ph + pc(np.asarray((v & lo) & (v >> k)))[None, :]) % 4
    if np.any(ph % 2):
        raise ValueError("images do not define a Clifford (non-Hermitian image)")
    return (pat | ((ph >> 1) << (2 * k))).astype(np.uint16)


def symplectic_ok(images: Sequence[tuple[int, int]], k: int) -> bool:
    """Check the commutation relations of basis images given as (x, z) pairs."""
    def omega(a, b):
        return (_popcount(a[0] & b[1]) + _popcount(a[1] & b[0])) % 2
    for i in range(2 * k):
        for j in range(2 * k):
            want = 1 if (abs(i - j) == k) else 0
            if omega(images[i], images[j]) != want:
                return False
    return True


@dataclass(frozen=True)
class CliffordGate:
    """A k-qubit Clifford given by the signed images of ``X_1..X_k, Z_1..Z_k``."""

    arity: int
    images: tuple[PauliOperator, ...]

    def __post_init__(self):
        k = self.arity
        if k < 1 or len(self.images) != 2 * k:
            raise ValueError("need 2k basis images")
        if any(p.n_qubits != k for p in self.images):
            raise ValueError("images must act on the gate's k qubits")
        if not symplectic_ok([(p.x, p.z) for p in self.images], k):
            raise ValueError("images violate the symplectic condition")

    @classmethod
    def from_patterns(cls, k: int, patterns: Sequence[int], sign_bits: Sequence[int]) -> "CliffordGate":
        lo = (1 << k) - 1
        imgs = tuple(PauliOperator(k, int(p) & lo, int(p) >> k, -1 if s else 1)
                     for p, s in zip(patterns, sign_bits))
        return cls(k, imgs)

    @classmethod
    def from_strings(cls, xs: Sequence[str], zs: Sequence[str]) -> "CliffordGate":
        """E.g. Hadamard: ``from_strings(["Z"], ["X"])``."""
        imgs = tuple(PauliOperator.from_string(s) for s in list(xs) + list(zs))
        return cls(len(xs), imgs)

    @classmethod
    def identity(cls, k: int) -> "CliffordGate":
        xs = [PauliOperator(k, 1 << j, 0) for j in range(k)]
        zs = [PauliOperator(k, 0, 1 << j) for j in range(k)]
        return cls(k, tuple(xs + zs))

    @property
    def patterns(self) -> list[int]:
        k = self.arity
        return [p.x | (p.z << k) for p in self.images]

    @property
    def sign_bits(self) -> list[int]:
        return [0 if p.sign > 0 else 1 for p in self.images]

    @cached_property
    def table(self) -> np.ndarray:
        return gate_tables(np.array([self.patterns]), np.array([self.sign_bits]), self.arity)[0]

    def conjugate(self, p: PauliOperator) -> PauliOperator:
        """``U p U^dagger`` for a k-qubit Pauli ``p``."""
        k = self.arity
        out = int(self.table[p.x | (p.z << k)])
        lo = (1 << k) - 1
        flip = (out >> (2 * k)) & 1
        pat = out & ((1 << 2 * k) - 1)
        return PauliOperator(k, pat & lo, pat >> k, -p.sign if flip else p.sign)

    def key(self) -> tuple:
        return tuple(self.patterns) + tuple(self.sign_bits)


def embed_gate(gate: CliffordGate, n_qubits: int, sites: Sequence[int]) -> CliffordGate:
    """The n-qubit Clifford acting as ``gate`` on ``sites`` and trivially elsewhere."""
    ident = CliffordGate.identity(n_qubits)
    imgs = list(ident.images)
    k = gate.arity
    for j, s in enumerate(sites):
        imgs[s - 1] = gate.images[j].embed(n_qubits, sites)
        imgs[n_qubits + s - 1] = gate.images[k + j].embed(n_qubits, sites)
    return CliffordGate(n_qubits, tuple(imgs))


# ---------------------------------------------------------------------------
# Stabilizer states

def _destabilizers(xs: list[int], zs: list[int], n: int) -> list[tuple[int, int]]:
    """Partner Paulis d_j with omega(s_i, d_j) = delta_ij and isotropic d's."""
    full = (1 << (2 * n)) - 1
    # omega(s, d) = a_s . (d_x | d_z << n) with a_s = s_z | s_x << n
    rows = [(zs[i] | (xs[i] << n), 1 << i) for i in range(n)]
    pivots = []
    rank = 0
    for col in range(2 * n):
        p = next((i for i in range(rank, n) if (rows[i][0] >> col) & 1), None)
        if p is None:
            continue
        rows[rank], rows[p] = rows[p], rows[rank]
        for i in range(n):
            if i != rank and (rows[i][0] >> col) & 1:
                rows[i] = (rows[i][0] ^ rows[rank][0], rows[i][1] ^ rows[rank][1])
        pivots.append(col)
        rank += 1
    if rank != n:
        raise ValueError("generators are not independent")
    # rows[k] = (e_k-th reduced functional, T[k, :]) ; d_j = sum_k T[k, j] e_{pivot_k}
    ds = []
    for j in range(n):
        v = 0
        for k in range(n):
            if (rows[k][1] >> j) & 1:
                v |= 1 << pivots[k]
        ds.append(v & full)
    dx = [v & ((1 << n) - 1) for v in ds]
    dz = [v >> n for v in ds]

    def omega(ax, az, bx, bz):
        return (_popcount(ax & bz) + _popcount(az & bx)) & 1

    for j in range(n):
        for i in range(j):
            if omega(dx[i], dz[i], dx[j], dz[j]):
                dx[j] ^= xs[i]
                dz[j] ^= zs[i]
    return list(zip(dx, dz))


class StabilizerState:
    """A pure N-qubit stabilizer state.

    ``x``/``z`` are ``(2N, W)`` word arrays and ``r`` the sign bits; rows
    ``N..2N-1`` are the stabilizer generators.
    """

    def __init__(self, n_qubits: int, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.n_qubits = n_qubits
        self.x = x
        self.z = z
        self.r = r

    @classmethod
    def zero(cls, n_qubits: int) -> "StabilizerState":
        """|0...0>: destabilizers X_i, stabilizers Z_i."""
        nw = n_words(n_qubits)
        x = np.zeros((2 * n_qubits, nw), dtype=np.uint64)
        z = np.zeros((2 * n_qubits, nw), dtype=np.uint64)
        for q in range(n_qubits):
            x[q, q // WORD] = np.uint64(1) << np.uint64(q % WORD)
            z[n_qubits + q, q // WORD] = np.uint64(1) << np.uint64(q % WORD)
        return cls(n_qubits, x, z, np.zeros(2 * n_qubits, dtype=np.uint8))

    @classmethod
    def from_generators(cls, generators: Sequence[PauliOperator]) -> "StabilizerState":
        n = generators[0].n_qubits
        if len(generators) != n or any(g.n_qubits != n for g in generators):
            raise ValueError("need exactly N generators on N qubits")
        for i, a in enumerate(generators):
            for b in generators[i + 1:]:
                if not a.commutes(b):
                    raise ValueError(f"generators {a} and {b} anticommute")
        xs = [g.x for g in generators]
        zs = [g.z for g in generators]
        destab = _destabilizers(xs, zs, n)
        nw = n_words(n)
        x = np.zeros((2 * n, nw), dtype=np.uint64)
        z = np.zeros((2 * n, nw), dtype=np.uint64)
        r = np.zeros(2 * n, dtype=np.uint8)
        for i, (dx, dz) in enumerate(destab):
            x[i], z[i] = int_to_words(dx, nw), int_to_words(dz, nw)
        for i, g in enumerate(generators):
            x[n + i], z[n + i] = g.words(nw)
            r[n + i] = 0 if g.sign > 0 else 1
        return cls(n, x, z, r)

    def copy(self) -> "StabilizerState":
        return StabilizerState(self.n_qubits, self.x.copy(), self.z.copy(), self.r.copy())

    def row(self, i: int) -> PauliOperator:
        return PauliOperator(self.n_qubits, words_to_int(self.x[i]), words_to_int(self.z[i]),
                             -1 if self.r[i] else 1)

    @property
    def generators(self) -> list[PauliOperator]:
        n = self.n_qubits
        return [self.row(n + i) for i in range(n)]

    @property
    def destabilizers(self) -> list[PauliOperator]:
        return [self.row(i).unsigned for i in range(self.n_qubits)]

    def append_qubits(self, k: int) -> "StabilizerState":
        """Return a new state with ``k`` extra qubits in |0>, appended as sites N+1..N+k."""
        n, m = self.n_qubits, self.n_qubits + k
        nw = n_words(m)
        x = np.zeros((2 * m, nw), dtype=np.uint64)
        z = np.zeros((2 * m, nw), dtype=np.uint64)
        r = np.zeros(2 * m, dtype=np.uint8)
        ow = self.x.shape[1]
        x[:n, :ow], z[:n, :ow], r[:n] = self.x[:n], self.z[:n], self.r[:n]
        x[m:m + n, :ow], z[m:m + n, :ow], r[m:m + n] = self.x[n:], self.z[n:], self.r[n:]
        for j in range(k):
            q = n + j
            x[n + j, q // WORD] = np.uint64(1) << np.uint64(q % WORD)
            z[m + n + j, q // WORD] = np.uint64(1) << np.uint64(q % WORD)
        return StabilizerState(m, x, z, r)

    def __repr__(self):
        return f"StabilizerState({', '.join(str(g) for g in self.generators)})"


def _check_sites(n_qubits: int, sites: Sequence[int]) -> list[int]:
    cols = []
    for s in sites:
        if not 1 <= int(s) <= n_qubits:
            raise ValueError(f"site {s} outside 1..{n_qubits}")
        cols.append(int(s) - 1)
    if len(set(cols)) != len(cols):
        raise ValueError("repeated site")
    return cols


def apply_clifford(state: StabilizerState, gate: CliffordGate, sites: Sequence[int]) -> StabilizerState:
    """Conjugate the state by ``gate`` on ``sites`` (in place; returns ``state``)."""
    if len(sites) != gate.arity:
        raise ValueError("site count does not match gate arity")
    cols = _check_sites(state.n_qubits, sites)
    _backend.kernels.apply_gate(state.x, state.z, state.r, cols, gate.table)
    return state


def measure_pauli(state: StabilizerState, p: PauliOperator, rng=None, bit: int | None = None):
    """Measure ``p`` (in place). Returns ``(state, outcome)`` with outcome +-1.

    A random outcome takes ``bit`` if given, otherwise one bit drawn from
    ``rng``; bit 0 means +1. The bit is drawn only when it is needed.
    """
    if p.sign != 1:
        raise ValueError("measurement operators carry sign +1")
    if p.n_qubits != state.n_qubits:
        raise ValueError("register size mismatch")
    px, pz = p.words(state.x.shape[1])
    if bit is None:
        # peek: only draw when the outcome is random
        if is_random_outcome(state, p):
            bit = int(rng.integers(0, 2))
        else:
            bit = 0
    code = _backend.kernels.measure_words(state.x, state.z, state.r, state.n_qubits, px, pz, int(bit))
    return state, (-1 if code & 1 else 1)


def is_random_outcome(state: StabilizerState, p: PauliOperator) -> bool:
    n = state.n_qubits
    px, pz = p.words(state.x.shape[1])
    sx, sz = state.x[n:], state.z[n:]
    anti = (np.bitwise_count(sx & pz).sum(axis=1) + np.bitwise_count(sz & px).sum(axis=1)) & 1
    return bool(anti.any())


def expectation(state: StabilizerState, p: PauliOperator) -> int:
    """<p> on a pure stabilizer state: +1, -1 or 0."""
    if is_random_outcome(state, p):
        return 0
    _, out = measure_pauli(state.copy(), p.unsigned, bit=0)
    return out * p.sign


def region_mask_words(region: Iterable[int], n_qubits: int) -> tuple[np.ndarray, int]:
    region = set(int(s) for s in region)
    mask = sites_mask(region, n_qubits)
    return int_to_words(mask, n_words(n_qubits)), len(region)


def entanglement_entropy(state: StabilizerState, region: Iterable[int]) -> int:
    """Entropy in bits of ``region`` (1-based sites): rank of the restricted generators minus |A|."""
    mask, size = region_mask_words(region, state.n_qubits)
    if size == 0:
        return 0
    n = state.n_qubits
    rank = _backend.kernels.region_rank(state.x, state.z, n, 2 * n, mask)
    return int(rank - size)


def generator_rank(x: np.ndarray, z: np.ndarray) -> int:
    m = np.ascontiguousarray(np.concatenate([x, z], axis=1))
    return int(_backend.kernels.gf2_rank(m))


def contains_up_to_sign(state: StabilizerState, p: PauliOperator) -> bool:
    """Whether ``+-p`` lies in the state's stabilizer group."""
    n = state.n_qubits
    x, z = state.x[n:], state.z[n:]
    px, pz = p.words(x.shape[1])
    base = generator_rank(x, z)
    return generator_rank(np.vstack([x, px]), np.vstack([z, pz])) == base


def clipped_endpoints(state: StabilizerState) -> tuple[np.ndarray, np.ndarray]:
    """Left/right endpoint columns (0-based) of a clipped generator set."""
    n = state.n_qubits
    x, z, r = state.x[n:].copy(), state.z[n:].copy(), state.r[n:].copy()
    return _backend.kernels.clip_endpoints(x, z, r, n)


def clip_gauge(state: StabilizerState) -> StabilizerState:
    """Same stabilizer group, generators in the clipped gauge."""
    n = state.n_qubits
    x, z, r = state.x[n:].copy(), state.z[n:].copy(), state.r[n:].copy()
    _backend.kernels.clip_endpoints(x, z, r, n)
    gens = [PauliOperator(n, words_to_int(x[i]), words_to_int(z[i]), -1 if r[i] else 1)
            for i in range(n)]
    return StabilizerState.from_generators(gens)


def is_clipped(generators: Sequence[PauliOperator]) -> bool:
    """Check both clipped-gauge conditions on a generator list."""
    n = generators[0].n_qubits
    rho_l = [[] for _ in range(n)]
    rho_r = [[] for _ in range(n)]
    for g in generators:
        sup = g.support
        if not sup:
            return False
        lo, hi = sup[0] - 1, sup[-1] - 1
        rho_l[lo].append(((g.x >> lo) & 1) | (((g.z >> lo) & 1) << 1))
        rho_r[hi].append(((g.x >> hi) & 1) | (((g.z >> hi) & 1) << 1))
    for i in range(n):
        if len(rho_l[i]) + len(rho_r[i]) != 2:
            return False
        for codes in (rho_l[i], rho_r[i]):
            if len(codes) == 2 and codes[0] == codes[1]:
                return False
    return True


def crossing_entropy(left: np.ndarray, right: np.ndarray, a: int, b: int) -> int:
    """Entropy of the contiguous sites ``a..b`` (1-based) from clipped endpoints."""
    lo, hi = a - 1, b - 1
    in_l = (left >= lo) & (left <= hi)
    in_r = (right >= lo) & (right <= hi)
    return int(np.count_nonzero(in_l ^ in_r)) // 2


def contiguous_entropy_table(left: np.ndarray, right: np.ndarray, n_sites: int) -> np.ndarray:
    """``T[a, b]`` = entropy of sites ``a..b`` (1-based, ``a <= b``); zero elsewhere."""
    a = np.arange(1, n_sites + 1)[:, None, None] - 1
    b = np.arange(1, n_sites + 1)[None, :, None] - 1
    in_l = (left[None, None, :] >= a) & (left[None, None, :] <= b)
    in_r = (right[None, None, :] >= a) & (right[None, None, :] <= b)
    table = np.count_nonzero(in_l ^ in_r, axis=2) // 2
    out = np.zeros((n_sites + 1, n_sites + 1), dtype=np.int64)
    out[1:, 1:] = np.triu(table)
    return out


def prefix_entropies(state: StabilizerState, n_sites: int | None = None) -> np.ndarray:
    """``S([1, x])`` for ``x = 1..n_sites-1`` using one clipping pass."""
    n_sites = state.n_qubits if n_sites is None else n_sites
    left, right = clipped_endpoints(state)
    xs = np.arange(1, n_sites)
    cut_l = left[None, :] < xs[:, None]
    cut_r = right[None, :] < xs[:, None]
    return np.count_nonzero(cut_l ^ cut_r, axis=1) // 2


def same_group(a: StabilizerState, b: StabilizerState, signs: bool = False) -> bool:
    """Equality of stabilizer groups (optionally including signs)."""
    if a.n_qubits != b.n_qubits:
        return False
    for g in b.generators:
        if not contains_up_to_sign(a, g):
            return False
        if signs and expectation(a, g.unsigned) != g.sign:
            return False
    return True
