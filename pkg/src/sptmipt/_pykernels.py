"""Reference implementation of the hot kernels in numpy.

Every function here has a twin of the same name and signature in the
compiled ``_kernels`` extension; see ``_backend`` for how one is chosen.

Layout conventions shared with the compiled kernels:

* A Pauli row is two ``uint64`` word arrays ``x``/``z`` (bit ``c`` of the row
  is column ``c``, i.e. qubit ``c + 1``) plus a sign bit ``r`` (1 means -1).
  The Pauli denoted by ``(x, z)`` is ``i^{|x & z|} X^x Z^z`` so that both bits
  set is ``Y``.
* A pure-state tableau holds ``2n`` rows: destabilizers ``0..n-1`` followed by
  stabilizers ``n..2n-1``.
* Local Pauli codes at one column are ``x + 2 z`` (0 = I, 1 = X, 2 = Z, 3 = Y).
* Event kinds: 0 unitary, 1 single-qubit measurement, 2 stabilizer
  measurement, 3 no-op.
"""

import numpy as np

UNITARY, SINGLE, STABILIZER, NOOP = 0, 1, 2, 3

_ONE = np.uint64(1)


def _pc(a):
    return np.bitwise_count(a).sum(axis=-1, dtype=np.int64)


def _bit(words, col):
    return (words[..., col >> 6] >> np.uint64(col & 63)) & _ONE


def _rowmul(x, z, r, targets, src):
    """row[t] <- row[t] * row[src] for every t in ``targets``."""
    if len(targets) == 0:
        return
    x1, z1 = x[targets], z[targets]
    x2, z2 = x[src], z[src]
    x3, z3 = x1 ^ x2, z1 ^ z2
    e = _pc(x1 & z1) + _pc(x2 & z2) + 2 * _pc(z1 & x2) - _pc(x3 & z3)
    e += 2 * r[targets].astype(np.int64) + 2 * int(r[src])
    x[targets] = x3
    z[targets] = z3
    r[targets] = ((e % 4) >> 1).astype(np.uint8)


def _anticommuting(x, z, px, pz):
    return ((_pc(x & pz) + _pc(z & px)) & 1).astype(bool)


def sparse_words(n_words, cols, codes):
    px = np.zeros(n_words, dtype=np.uint64)
    pz = np.zeros(n_words, dtype=np.uint64)
    for c, code in zip(cols, codes):
        c = int(c)
        if code & 1:
            px[c >> 6] |= _ONE << np.uint64(c & 63)
        if code & 2:
            pz[c >> 6] |= _ONE << np.uint64(c & 63)
    return px, pz


def measure_words(x, z, r, n, px, pz, bit):
    """Projective measurement of the +1-signed Pauli ``(px, pz)``.

    Returns ``outcome_bit | (random << 1)``; a random outcome takes ``bit``.
    """
    anti = _anticommuting(x[: 2 * n], z[: 2 * n], px, pz)
    stab_anti = np.flatnonzero(anti[n:])
    if stab_anti.size:
        p = n + int(stab_anti[0])
        targets = np.flatnonzero(anti)
        targets = targets[targets != p]
        _rowmul(x, z, r, targets, p)
        x[p - n] = x[p]
        z[p - n] = z[p]
        r[p - n] = r[p]
        x[p] = px
        z[p] = pz
        r[p] = bit & 1
        return (bit & 1) | 2
    rows = n + np.flatnonzero(anti[:n])
    sx = np.zeros_like(px)
    sz = np.zeros_like(pz)
    sr = 0
    for i in rows:
        x2, z2 = x[i], z[i]
        x3, z3 = sx ^ x2, sz ^ z2
        e = (int(_pc(sx & sz)) + int(_pc(x2 & z2)) + 2 * int(_pc(sz & x2))
             - int(_pc(x3 & z3)) + 2 * sr + 2 * int(r[i]))
        sx, sz, sr = x3, z3, (e % 4) >> 1
    return sr


def measure_sparse(x, z, r, n, cols, codes, bit):
    px, pz = sparse_words(x.shape[1], cols, codes)
    return measure_words(x, z, r, n, px, pz, bit)


def apply_gate(x, z, r, cols, table):
    """Conjugate every row through a k-qubit gate acting on ``cols``.

    ``table[v]`` holds the image of local pattern ``v`` (x bits low, z bits
    high) in its low ``2k`` bits and a sign flip in bit ``2k``.
    """
    k = len(cols)
    v = np.zeros(x.shape[0], dtype=np.int64)
    for j, c in enumerate(cols):
        v |= _bit(x, int(c)).astype(np.int64) << j
        v |= _bit(z, int(c)).astype(np.int64) << (k + j)
    out = np.asarray(table, dtype=np.int64)[v]
    for j, c in enumerate(cols):
        c = int(c)
        w, m = c >> 6, _ONE << np.uint64(c & 63)
        xb = ((out >> j) & 1).astype(bool)
        zb = ((out >> (k + j)) & 1).astype(bool)
        x[:, w] = np.where(xb, x[:, w] | m, x[:, w] & ~m)
        z[:, w] = np.where(zb, z[:, w] | m, z[:, w] & ~m)
    r ^= ((out >> (2 * k)) & 1).astype(np.uint8)


def _event_target(kind, site, nchain, basis_x, periodic):
    s = site - 1
    if kind == SINGLE:
        return [s], [1 if basis_x else 2]
    if periodic:
        left, right = (s - 1) % nchain, (s + 1) % nchain
    else:
        left, right = s - 1, s + 1
    return [left, s, right], [1, 2, 1]


def run_events(x, z, r, n, kinds, sites, gates, bits, tables, start, stop,
               nchain, basis_x, periodic):
    """Apply circuit events ``start..stop-1`` to a pure-state tableau."""
    stop = min(stop, len(kinds))
    for e in range(start, stop):
        kind = int(kinds[e])
        if kind == NOOP:
            continue
        cols, codes = _event_target(kind, int(sites[e]), nchain, basis_x, periodic)
        if kind == UNITARY:
            apply_gate(x, z, r, cols, tables[int(gates[e])])
        else:
            measure_sparse(x, z, r, n, cols, codes, int(bits[e]))


def gf2_rank(m):
    """Rank over GF(2) of the packed rows of ``m`` (destroys ``m``)."""
    rows, n_words = m.shape
    rank = 0
    for w in range(n_words):
        for b in range(64):
            if rank == rows:
                return rank
            col = (m[rank:, w] >> np.uint64(b)) & _ONE
            hits = np.flatnonzero(col)
            if hits.size == 0:
                continue
            p = rank + int(hits[0])
            if p != rank:
                m[[rank, p]] = m[[p, rank]]
            others = rank + 1 + np.flatnonzero((m[rank + 1:, w] >> np.uint64(b)) & _ONE)
            m[others] ^= m[rank]
            rank += 1
    return rank


def region_rank(x, z, row0, row1, mask):
    m = np.concatenate([x[row0:row1] & mask, z[row0:row1] & mask], axis=1)
    return gf2_rank(m)


def _code(x, z, row, col):
    w, b = col >> 6, np.uint64(col & 63)
    return int((x[row, w] >> b) & _ONE) | (int((z[row, w] >> b) & _ONE) << 1)


def _swap(x, z, r, a, b):
    if a != b:
        x[[a, b]] = x[[b, a]]
        z[[a, b]] = z[[b, a]]
        r[[a, b]] = r[[b, a]]


def clip_endpoints(x, z, r, nq):
    """Bring the rows into the clipped gauge in place.

    Returns ``(left, right)`` endpoint columns per row.
    """
    rows = x.shape[0]
    i = 0
    for j in range(nq):
        if i >= rows:
            break
        k1 = next((m for m in range(i, rows) if _code(x, z, m, j)), None)
        if k1 is None:
            continue
        _swap(x, z, r, k1, i)
        c1 = _code(x, z, i, j)
        k2 = next((m for m in range(i + 1, rows) if _code(x, z, m, j) not in (0, c1)), None)
        if k2 is not None:
            _swap(x, z, r, k2, i + 1)
            c2 = _code(x, z, i + 1, j)
            for m in range(i + 2, rows):
                c = _code(x, z, m, j)
                if c == c1:
                    _rowmul(x, z, r, [m], i)
                elif c == c2:
                    _rowmul(x, z, r, [m], i + 1)
                elif c:
                    _rowmul(x, z, r, [m], i)
                    _rowmul(x, z, r, [m], i + 1)
            i += 2
        else:
            for m in range(i + 1, rows):
                if _code(x, z, m, j):
                    _rowmul(x, z, r, [m], i)
            i += 1

    unfrozen = list(range(rows - 1, -1, -1))
    for j in range(nq - 1, -1, -1):
        k1 = next((t for t, m in enumerate(unfrozen) if _code(x, z, m, j)), None)
        if k1 is None:
            continue
        a = unfrozen[k1]
        c1 = _code(x, z, a, j)
        k2 = next((t for t in range(k1 + 1, len(unfrozen))
                   if _code(x, z, unfrozen[t], j) not in (0, c1)), None)
        if k2 is not None:
            b = unfrozen[k2]
            c2 = _code(x, z, b, j)
            for t in range(k1 + 1, len(unfrozen)):
                if t == k2:
                    continue
                m = unfrozen[t]
                c = _code(x, z, m, j)
                if c == c1:
                    _rowmul(x, z, r, [m], a)
                elif c == c2:
                    _rowmul(x, z, r, [m], b)
                elif c:
                    _rowmul(x, z, r, [m], a)
                    _rowmul(x, z, r, [m], b)
            del unfrozen[k2]
            del unfrozen[k1]
        else:
            for t in range(k1 + 1, len(unfrozen)):
                m = unfrozen[t]
                if _code(x, z, m, j):
                    _rowmul(x, z, r, [m], a)
            del unfrozen[k1]

    left = np.full(rows, -1, dtype=np.int64)
    right = np.full(rows, -1, dtype=np.int64)
    for m in range(rows):
        support = [c for c in range(nq) if _code(x, z, m, c)]
        if support:
            left[m], right[m] = support[0], support[-1]
    return left, right


def channel_measure_words(x, z, r, n, px, pz):
    """Centralizer update of a mixed stabilizer group; returns the new size."""
    anti = np.flatnonzero(_anticommuting(x[:n], z[:n], px, pz))
    if anti.size == 0:
        return n
    p = int(anti[0])
    _rowmul(x, z, r, anti[1:], p)
    x[p:n - 1] = x[p + 1:n].copy()
    z[p:n - 1] = z[p + 1:n].copy()
    r[p:n - 1] = r[p + 1:n].copy()
    x[n - 1] = 0
    z[n - 1] = 0
    r[n - 1] = 0
    return n - 1


def channel_run_events(x, z, r, n, kinds, sites, gates, tables, start, stop,
                       nchain, basis_x, periodic, stop_at):
    """Run events on a mixed group; stops early once ``n <= stop_at``.

    Returns ``(n, next_event_index)``.
    """
    e = start
    stop = min(stop, len(kinds))
    while e < stop:
        if n <= stop_at:
            break
        kind = int(kinds[e])
        if kind != NOOP:
            cols, codes = _event_target(kind, int(sites[e]), nchain, basis_x, periodic)
            if kind == UNITARY:
                apply_gate(x[:n], z[:n], r[:n], cols, tables[int(gates[e])])
            else:
                px, pz = sparse_words(x.shape[1], cols, codes)
                n = channel_measure_words(x, z, r, n, px, pz)
        e += 1
    return n, e


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def perc_run(parent, size, node, next_id, kinds, sites, start, stop):
    """Cluster split/merge updates for events ``start..stop-1``.

    ``node[s]`` is the union-find element of chain column ``s``; splits take
    fresh elements from ``next_id`` (the caller guarantees capacity).
    Returns the new ``next_id``.
    """
    stop = min(stop, len(kinds))
    for e in range(start, stop):
        kind = int(kinds[e])
        s = int(sites[e]) - 1
        if kind == SINGLE:
            node[s] = next_id
            parent[next_id] = next_id
            size[next_id] = 1
            next_id += 1
        elif kind == STABILIZER:
            a = _find(parent, node[s - 1])
            b = _find(parent, node[s + 1])
            if a != b:
                if size[a] < size[b]:
                    a, b = b, a
                parent[b] = a
                size[a] += size[b]
        elif kind == UNITARY:
            raise ValueError("unitary events have no percolation representation")
    return next_id


def perc_roots(parent, node):
    return np.array([_find(parent, int(a)) for a in node], dtype=np.int64)


def prefix_crossings(labels):
    """``out[x]`` = number of clusters with sites in both ``[0, x)`` and ``[x, N)``."""
    n = len(labels)
    first, last = {}, {}
    for s, lab in enumerate(labels):
        lab = int(lab)
        first.setdefault(lab, s)
        last[lab] = s
    diff = np.zeros(n + 1, dtype=np.int64)
    for lab, lo in first.items():
        hi = last[lab]
        if hi > lo:
            diff[lo + 1] += 1
            diff[hi + 1] -= 1
    return np.cumsum(diff)
