# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; mirrors ``_pykernels`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t, uint16_t, int32_t, int8_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cdef enum:
    UNITARY = 0
    SINGLE = 1
    STABILIZER = 2
    NOOP = 3


cdef inline int _getbit(uint64_t[:, ::1] a, Py_ssize_t row, Py_ssize_t col) nogil:
    return <int>((a[row, col >> 6] >> (col & 63)) & 1)


cdef inline void _setbit(uint64_t[:, ::1] a, Py_ssize_t row, Py_ssize_t col, int v) nogil:
    cdef uint64_t m = (<uint64_t>1) << (col & 63)
    if v:
        a[row, col >> 6] |= m
    else:
        a[row, col >> 6] &= ~m


cdef inline void _rowmul(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                         Py_ssize_t t, Py_ssize_t s) nogil:
    cdef Py_ssize_t w, nw = x.shape[1]
    cdef uint64_t x1, z1, x2, z2, x3, z3
    cdef int64_t e = 2 * <int64_t>r[t] + 2 * <int64_t>r[s]
    for w in range(nw):
        x1 = x[t, w]; z1 = z[t, w]; x2 = x[s, w]; z2 = z[s, w]
        x3 = x1 ^ x2; z3 = z1 ^ z2
        e += (__builtin_popcountll(x1 & z1) + __builtin_popcountll(x2 & z2)
              + 2 * __builtin_popcountll(z1 & x2) - __builtin_popcountll(x3 & z3))
        x[t, w] = x3; z[t, w] = z3
    r[t] = <uint8_t>(((e % 4 + 4) % 4) >> 1)


cdef inline void _copyrow(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                          Py_ssize_t dst, Py_ssize_t src) nogil:
    cdef Py_ssize_t w
    for w in range(x.shape[1]):
        x[dst, w] = x[src, w]
        z[dst, w] = z[src, w]
    r[dst] = r[src]


cdef inline void _swaprow(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                          Py_ssize_t a, Py_ssize_t b) nogil:
    cdef Py_ssize_t w
    cdef uint64_t t
    cdef uint8_t tr
    if a == b:
        return
    for w in range(x.shape[1]):
        t = x[a, w]; x[a, w] = x[b, w]; x[b, w] = t
        t = z[a, w]; z[a, w] = z[b, w]; z[b, w] = t
    tr = r[a]; r[a] = r[b]; r[b] = tr


cdef inline int _anti_words(uint64_t[:, ::1] x, uint64_t[:, ::1] z, Py_ssize_t row,
                            uint64_t[::1] px, uint64_t[::1] pz) nogil:
    cdef Py_ssize_t w
    cdef int c = 0
    for w in range(x.shape[1]):
        c += __builtin_popcountll(x[row, w] & pz[w]) + __builtin_popcountll(z[row, w] & px[w])
    return c & 1


cdef inline int _anti_sparse(uint64_t[:, ::1] x, uint64_t[:, ::1] z, Py_ssize_t row,
                             int64_t* cols, int* codes, int k) nogil:
    cdef int j, c = 0
    for j in range(k):
        if codes[j] & 1:
            c += _getbit(z, row, cols[j])
        if codes[j] & 2:
            c += _getbit(x, row, cols[j])
    return c & 1


cdef int _measure_core(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                       Py_ssize_t n, uint64_t[::1] px, uint64_t[::1] pz,
                       int64_t* cols, int* codes, int k, int sparse, int bit,
                       uint64_t* sx, uint64_t* sz) nogil:
    cdef Py_ssize_t i, p = -1, w, nw = x.shape[1]
    cdef int a, j
    cdef int64_t e
    cdef uint64_t x1, z1, x2, z2, x3, z3
    for i in range(n, 2 * n):
        a = _anti_sparse(x, z, i, cols, codes, k) if sparse else _anti_words(x, z, i, px, pz)
        if a:
            p = i
            break
    if p >= 0:
        for i in range(2 * n):
            if i == p:
                continue
            a = _anti_sparse(x, z, i, cols, codes, k) if sparse else _anti_words(x, z, i, px, pz)
            if a:
                _rowmul(x, z, r, i, p)
        _copyrow(x, z, r, p - n, p)
        for w in range(nw):
            x[p, w] = 0
            z[p, w] = 0
        if sparse:
            for j in range(k):
                if codes[j] & 1:
                    _setbit(x, p, cols[j], 1)
                if codes[j] & 2:
                    _setbit(z, p, cols[j], 1)
        else:
            for w in range(nw):
                x[p, w] = px[w]
                z[p, w] = pz[w]
        r[p] = <uint8_t>(bit & 1)
        return (bit & 1) | 2
    for w in range(nw):
        sx[w] = 0
        sz[w] = 0
    e = 0
    for i in range(n):
        a = _anti_sparse(x, z, i, cols, codes, k) if sparse else _anti_words(x, z, i, px, pz)
        if not a:
            continue
        e += 2 * <int64_t>r[n + i]
        for w in range(nw):
            x1 = sx[w]; z1 = sz[w]; x2 = x[n + i, w]; z2 = z[n + i, w]
            x3 = x1 ^ x2; z3 = z1 ^ z2
            e += (__builtin_popcountll(x1 & z1) + __builtin_popcountll(x2 & z2)
                  + 2 * __builtin_popcountll(z1 & x2) - __builtin_popcountll(x3 & z3))
            sx[w] = x3; sz[w] = z3
    return <int>(((e % 4 + 4) % 4) >> 1)


def sparse_words(Py_ssize_t n_words, cols, codes):
    px = np.zeros(n_words, dtype=np.uint64)
    pz = np.zeros(n_words, dtype=np.uint64)
    for c, code in zip(cols, codes):
        c = int(c)
        if code & 1:
            px[c >> 6] |= np.uint64(1) << np.uint64(c & 63)
        if code & 2:
            pz[c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return px, pz


def measure_words(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t n,
                  uint64_t[::1] px, uint64_t[::1] pz, int bit):
    cdef Py_ssize_t nw = x.shape[1]
    cdef uint64_t* sx = <uint64_t*>malloc(nw * sizeof(uint64_t))
    cdef uint64_t* sz = <uint64_t*>malloc(nw * sizeof(uint64_t))
    cdef int64_t cols[1]
    cdef int codes[1]
    cdef int out
    with nogil:
        out = _measure_core(x, z, r, n, px, pz, cols, codes, 0, 0, bit, sx, sz)
    free(sx)
    free(sz)
    return out


def measure_sparse(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t n,
                   cols_in, codes_in, int bit):
    cdef Py_ssize_t nw = x.shape[1]
    cdef int64_t cols[8]
    cdef int codes[8]
    cdef int k = len(cols_in), j, out
    cdef uint64_t[::1] dummy = np.zeros(1, dtype=np.uint64)
    cdef uint64_t* sx = <uint64_t*>malloc(nw * sizeof(uint64_t))
    cdef uint64_t* sz = <uint64_t*>malloc(nw * sizeof(uint64_t))
    if k > 8:
        raise ValueError("sparse measurement supports at most 8 sites")
    for j in range(k):
        cols[j] = cols_in[j]
        codes[j] = codes_in[j]
    with nogil:
        out = _measure_core(x, z, r, n, dummy, dummy, cols, codes, k, 1, bit, sx, sz)
    free(sx)
    free(sz)
    return out


cdef void _apply_gate_core(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                           int64_t* cols, int k, uint16_t[::1] table) nogil:
    cdef Py_ssize_t row
    cdef int j, v, out
    for row in range(x.shape[0]):
        v = 0
        for j in range(k):
            v |= _getbit(x, row, cols[j]) << j
            v |= _getbit(z, row, cols[j]) << (k + j)
        if v == 0:
            continue
        out = table[v]
        for j in range(k):
            _setbit(x, row, cols[j], (out >> j) & 1)
            _setbit(z, row, cols[j], (out >> (k + j)) & 1)
        r[row] ^= <uint8_t>((out >> (2 * k)) & 1)


def apply_gate(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, cols_in, table_in):
    cdef int64_t cols[8]
    cdef int k = len(cols_in), j
    cdef uint16_t[::1] table = np.ascontiguousarray(table_in, dtype=np.uint16)
    for j in range(k):
        cols[j] = cols_in[j]
    with nogil:
        _apply_gate_core(x, z, r, cols, k, table)


cdef inline int _event_target(int kind, int64_t site, int64_t nchain, int basis_x,
                              int periodic, int64_t* cols, int* codes) nogil:
    cdef int64_t s = site - 1
    if kind == SINGLE:
        cols[0] = s
        codes[0] = 1 if basis_x else 2
        return 1
    if periodic:
        cols[0] = (s - 1 + nchain) % nchain
        cols[2] = (s + 1) % nchain
    else:
        cols[0] = s - 1
        cols[2] = s + 1
    cols[1] = s
    codes[0] = 1; codes[1] = 2; codes[2] = 1
    return 3


def run_events(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t n,
               int8_t[::1] kinds, int32_t[::1] sites, int32_t[::1] gates, uint8_t[::1] bits,
               uint16_t[:, ::1] tables, Py_ssize_t start, Py_ssize_t stop,
               int64_t nchain, int basis_x, int periodic):
    cdef Py_ssize_t e, nw = x.shape[1]
    cdef int64_t cols[3]
    cdef int codes[3]
    cdef int k, kind
    cdef uint64_t[::1] dummy = np.zeros(1, dtype=np.uint64)
    if stop > kinds.shape[0]:
        stop = kinds.shape[0]
    cdef uint64_t* sx = <uint64_t*>malloc(nw * sizeof(uint64_t))
    cdef uint64_t* sz = <uint64_t*>malloc(nw * sizeof(uint64_t))
    with nogil:
        for e in range(start, stop):
            kind = kinds[e]
            if kind == NOOP:
                continue
            k = _event_target(kind, sites[e], nchain, basis_x, periodic, cols, codes)
            if kind == UNITARY:
                _apply_gate_core(x, z, r, cols, 3, tables[gates[e]])
            else:
                _measure_core(x, z, r, n, dummy, dummy, cols, codes, k, 1, bits[e], sx, sz)
    free(sx)
    free(sz)


def gf2_rank(uint64_t[:, ::1] m):
    cdef Py_ssize_t rows = m.shape[0], nw = m.shape[1]
    cdef Py_ssize_t rank = 0, w, i, p, ww
    cdef int b
    cdef uint64_t mask, t
    with nogil:
        for w in range(nw):
            for b in range(64):
                if rank == rows:
                    break
                mask = (<uint64_t>1) << b
                p = -1
                for i in range(rank, rows):
                    if m[i, w] & mask:
                        p = i
                        break
                if p < 0:
                    continue
                if p != rank:
                    for ww in range(w, nw):
                        t = m[p, ww]; m[p, ww] = m[rank, ww]; m[rank, ww] = t
                for i in range(p + 1, rows):
                    if m[i, w] & mask:
                        for ww in range(w, nw):
                            m[i, ww] ^= m[rank, ww]
                rank += 1
    return rank


def region_rank(uint64_t[:, ::1] x, uint64_t[:, ::1] z, Py_ssize_t row0, Py_ssize_t row1,
                uint64_t[::1] mask):
    cdef Py_ssize_t nw = x.shape[1], i, w
    cdef cnp.ndarray[uint64_t, ndim=2] buf = np.empty((row1 - row0, 2 * nw), dtype=np.uint64)
    cdef uint64_t[:, ::1] m = buf
    for i in range(row1 - row0):
        for w in range(nw):
            m[i, w] = x[row0 + i, w] & mask[w]
            m[i, nw + w] = z[row0 + i, w] & mask[w]
    return gf2_rank(m)


cdef inline int _code(uint64_t[:, ::1] x, uint64_t[:, ::1] z, Py_ssize_t row, Py_ssize_t col) nogil:
    return _getbit(x, row, col) | (_getbit(z, row, col) << 1)


cdef inline void _eliminate(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                            Py_ssize_t m, int c, Py_ssize_t a, int c1, Py_ssize_t b, int c2) nogil:
    if c == 0:
        return
    if c == c1:
        _rowmul(x, z, r, m, a)
    elif b >= 0 and c == c2:
        _rowmul(x, z, r, m, b)
    else:
        _rowmul(x, z, r, m, a)
        _rowmul(x, z, r, m, b)


def clip_endpoints(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t nq):
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t i = 0, j, m, k1, k2, t, a, b, nun, q
    cdef int c1, c2, c
    left_arr = np.full(rows, -1, dtype=np.int64)
    right_arr = np.full(rows, -1, dtype=np.int64)
    cdef int64_t[::1] left = left_arr
    cdef int64_t[::1] right = right_arr
    cdef int64_t* unfrozen = <int64_t*>malloc(rows * sizeof(int64_t))
    with nogil:
        for j in range(nq):
            if i >= rows:
                break
            k1 = -1
            for m in range(i, rows):
                if _code(x, z, m, j):
                    k1 = m
                    break
            if k1 < 0:
                continue
            _swaprow(x, z, r, k1, i)
            c1 = _code(x, z, i, j)
            k2 = -1
            for m in range(i + 1, rows):
                c = _code(x, z, m, j)
                if c != 0 and c != c1:
                    k2 = m
                    break
            if k2 >= 0:
                _swaprow(x, z, r, k2, i + 1)
                c2 = _code(x, z, i + 1, j)
                for m in range(i + 2, rows):
                    _eliminate(x, z, r, m, _code(x, z, m, j), i, c1, i + 1, c2)
                i += 2
            else:
                for m in range(i + 1, rows):
                    if _code(x, z, m, j):
                        _rowmul(x, z, r, m, i)
                i += 1

        nun = rows
        for t in range(rows):
            unfrozen[t] = rows - 1 - t
        j = nq - 1
        while j >= 0:
            k1 = -1
            for t in range(nun):
                if _code(x, z, unfrozen[t], j):
                    k1 = t
                    break
            if k1 >= 0:
                a = unfrozen[k1]
                c1 = _code(x, z, a, j)
                k2 = -1
                for t in range(k1 + 1, nun):
                    c = _code(x, z, unfrozen[t], j)
                    if c != 0 and c != c1:
                        k2 = t
                        break
                if k2 >= 0:
                    b = unfrozen[k2]
                    c2 = _code(x, z, b, j)
                    for t in range(k1 + 1, nun):
                        if t == k2:
                            continue
                        m = unfrozen[t]
                        _eliminate(x, z, r, m, _code(x, z, m, j), a, c1, b, c2)
                    # drop positions k1 < k2
                    for t in range(k2, nun - 1):
                        unfrozen[t] = unfrozen[t + 1]
                    nun -= 1
                    for t in range(k1, nun - 1):
                        unfrozen[t] = unfrozen[t + 1]
                    nun -= 1
                else:
                    for t in range(k1 + 1, nun):
                        m = unfrozen[t]
                        if _code(x, z, m, j):
                            _rowmul(x, z, r, m, a)
                    for t in range(k1, nun - 1):
                        unfrozen[t] = unfrozen[t + 1]
                    nun -= 1
            j -= 1

        for m in range(rows):
            for q in range(nq):
                if _code(x, z, m, q):
                    if left[m] < 0:
                        left[m] = q
                    right[m] = q
    free(unfrozen)
    return left_arr, right_arr


cdef Py_ssize_t _channel_measure_core(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r,
                                      Py_ssize_t n, uint64_t[::1] px, uint64_t[::1] pz,
                                      int64_t* cols, int* codes, int k, int sparse) nogil:
    cdef Py_ssize_t i, p = -1, w, nw = x.shape[1]
    cdef int a
    for i in range(n):
        a = _anti_sparse(x, z, i, cols, codes, k) if sparse else _anti_words(x, z, i, px, pz)
        if a:
            if p < 0:
                p = i
            else:
                _rowmul(x, z, r, i, p)
    if p < 0:
        return n
    for i in range(p, n - 1):
        _copyrow(x, z, r, i, i + 1)
    for w in range(nw):
        x[n - 1, w] = 0
        z[n - 1, w] = 0
    r[n - 1] = 0
    return n - 1


def channel_measure_words(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t n,
                          uint64_t[::1] px, uint64_t[::1] pz):
    cdef int64_t cols[1]
    cdef int codes[1]
    return _channel_measure_core(x, z, r, n, px, pz, cols, codes, 0, 0)


def channel_run_events(uint64_t[:, ::1] x, uint64_t[:, ::1] z, uint8_t[::1] r, Py_ssize_t n,
                       int8_t[::1] kinds, int32_t[::1] sites, int32_t[::1] gates,
                       uint16_t[:, ::1] tables, Py_ssize_t start, Py_ssize_t stop,
                       int64_t nchain, int basis_x, int periodic, Py_ssize_t stop_at):
    cdef Py_ssize_t e = start
    cdef int64_t cols[3]
    cdef int codes[3]
    cdef int k, kind
    cdef uint64_t[::1] dummy = np.zeros(1, dtype=np.uint64)
    if stop > kinds.shape[0]:
        stop = kinds.shape[0]
    with nogil:
        while e < stop:
            if n <= stop_at:
                break
            kind = kinds[e]
            if kind != NOOP:
                k = _event_target(kind, sites[e], nchain, basis_x, periodic, cols, codes)
                if kind == UNITARY:
                    _apply_gate_core(x[:n], z[:n], r[:n], cols, 3, tables[gates[e]])
                else:
                    n = _channel_measure_core(x, z, r, n, dummy, dummy, cols, codes, k, 1)
            e += 1
    return n, e


cdef inline int64_t _find(int64_t[::1] parent, int64_t a) nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def perc_run(int64_t[::1] parent, int64_t[::1] size, int64_t[::1] node, int64_t next_id,
             int8_t[::1] kinds, int32_t[::1] sites, Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t e
    cdef int64_t s, a, b, t
    cdef int kind
    cdef int bad = 0
    if stop > kinds.shape[0]:
        stop = kinds.shape[0]
    with nogil:
        for e in range(start, stop):
            kind = kinds[e]
            s = sites[e] - 1
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
                        t = a; a = b; b = t
                    parent[b] = a
                    size[a] += size[b]
            elif kind == UNITARY:
                bad = 1
                break
    if bad:
        raise ValueError("unitary events have no percolation representation")
    return next_id


def perc_roots(int64_t[::1] parent, int64_t[::1] node):
    cdef Py_ssize_t s, n = node.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for s in range(n):
            out[s] = _find(parent, node[s])
    return out_arr


def prefix_crossings(labels_in):
    cdef int64_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.int64)
    cdef Py_ssize_t n = labels.shape[0], s, lo, hi
    # relabel into a dense range so first/last fit in flat arrays
    _, dense_arr = np.unique(np.asarray(labels), return_inverse=True)
    cdef int64_t[::1] dense = dense_arr.astype(np.int64)
    first_arr = np.full(n, -1, dtype=np.int64)
    last_arr = np.full(n, -1, dtype=np.int64)
    diff_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] first = first_arr
    cdef int64_t[::1] last = last_arr
    cdef int64_t[::1] diff = diff_arr
    with nogil:
        for s in range(n):
            if first[dense[s]] < 0:
                first[dense[s]] = s
            last[dense[s]] = s
        for s in range(n):
            lo = first[s]
            if lo < 0:
                continue
            hi = last[s]
            if hi > lo:
                diff[lo + 1] += 1
                diff[hi + 1] -= 1
    return np.cumsum(diff_arr)
