"""Numba kernels for walk simulation.

Sample ``i`` of a batch is driven by the substream ``(seed, i)``, so results
do not depend on batch boundaries or on the order samples are processed.
A walk is replayed from its substream start when a second pass is needed
(sizing a hash table, then filling it), which avoids storing paths.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

from .rng import mix64, next_uniform, stream_start

_OFFSET = np.int64(1 << 40)


@nb.njit(cache=True, inline="always")
def _step(state, t, time, dim):
    """Advance one holding time; return ``(state, time, axis, sign)``; ``axis = -1`` once past ``t``."""
    state, u = next_uniform(state)
    time += -math.log1p(-u)
    if time > t:
        return state, time, -1, 0
    state, u = next_uniform(state)
    k = int(u * 2 * dim)
    if k >= 2 * dim:
        k = 2 * dim - 1
    return state, time, k // 2, 1 if k % 2 == 0 else -1


@nb.njit(cache=True)
def _count_jumps(seed, index, t, dim):
    state = stream_start(seed, index)
    time = 0.0
    n = 0
    while True:
        state, time, axis, sign = _step(state, t, time, dim)
        if axis < 0:
            return n
        n += 1


@nb.njit(cache=True, inline="always")
def _hash(pos, dim):
    h = np.uint64(0x243F6A8885A308D3)
    for i in range(dim):
        h = mix64(h ^ np.uint64(pos[i] + _OFFSET))
    return h


@nb.njit(cache=True)
def _insert(keys, stamp, cur, pos, dim):
    """Insert ``pos`` into the table; return True if it was new."""
    mask = np.uint64(stamp.size - 1)
    h = _hash(pos, dim) & mask
    while stamp[h] == cur:
        same = True
        for i in range(dim):
            if keys[h, i] != pos[i]:
                same = False
                break
        if same:
            return False
        h = (h + np.uint64(1)) & mask
    stamp[h] = cur
    for i in range(dim):
        keys[h, i] = pos[i]
    return True


@nb.njit(cache=True)
def _member(keys, stamp, cur, pos, dim):
    mask = np.uint64(stamp.size - 1)
    h = _hash(pos, dim) & mask
    while stamp[h] == cur:
        same = True
        for i in range(dim):
            if keys[h, i] != pos[i]:
                same = False
                break
        if same:
            return True
        h = (h + np.uint64(1)) & mask
    return False


def _capacity(t):
    """Power of two at least ``4 (t + 4 sqrt(t)) + 16``."""
    need = 4.0 * (t + 4.0 * math.sqrt(t)) + 16.0
    return 1 << int(math.ceil(math.log2(need)))


@nb.njit(cache=True)
def _ensure(keys, stamp, jumps, dim):
    cap = stamp.size
    if 2 * (jumps + 1) <= cap:
        return keys, stamp
    while 2 * (jumps + 1) > cap:
        cap *= 2
    return np.zeros((cap, dim), dtype=np.int64), np.zeros(cap, dtype=np.int64)


@nb.njit(cache=True)
def _fill(seed, index, t, dim, origin, keys, stamp, cur, other_keys, other_stamp, other_cur):
    """Replay a walk started at ``origin`` into the table.

    Returns ``(size, jumps, max_disp, overlap)`` where ``max_disp`` is
    measured from ``origin`` and ``overlap`` counts distinct visited sites
    also present in the other table (pass ``other_cur = 0`` to skip).
    """
    pos = origin.copy()
    _insert(keys, stamp, cur, pos, dim)
    size = 1
    overlap = 0
    if other_cur != 0 and _member(other_keys, other_stamp, other_cur, pos, dim):
        overlap = 1
    state = stream_start(seed, index)
    time = 0.0
    jumps = 0
    maxd = 0
    while True:
        state, time, axis, sign = _step(state, t, time, dim)
        if axis < 0:
            break
        jumps += 1
        pos[axis] += sign
        a = abs(pos[axis] - origin[axis])
        if a > maxd:
            maxd = a
        if _insert(keys, stamp, cur, pos, dim):
            size += 1
            if other_cur != 0 and _member(other_keys, other_stamp, other_cur, pos, dim):
                overlap += 1
    return size, jumps, maxd, overlap


@nb.njit(cache=True)
def _walk_1d(seed, index, t):
    """Return ``(lo, hi, jumps)`` of a one-dimensional walk; the range is ``[lo, hi]``."""
    state = stream_start(seed, index)
    time = 0.0
    x = 0
    lo = 0
    hi = 0
    jumps = 0
    while True:
        state, time, axis, sign = _step(state, t, time, 1)
        if axis < 0:
            return lo, hi, jumps
        jumps += 1
        x += sign
        if x < lo:
            lo = x
        elif x > hi:
            hi = x


@nb.njit(cache=True)
def sausage_batch(seed, first, n, dim, t, cap, want_sausage):
    """Sausage sizes, jump counts and sup-norm maximal displacements of walks ``first .. first+n-1``."""
    sizes = np.zeros(n, dtype=np.int64)
    jumps = np.zeros(n, dtype=np.int64)
    maxd = np.zeros(n, dtype=np.int64)
    keys = np.zeros((cap, dim), dtype=np.int64)
    stamp = np.zeros(cap, dtype=np.int64)
    empty_k = np.zeros((1, dim), dtype=np.int64)
    empty_s = np.zeros(1, dtype=np.int64)
    zero = np.zeros(dim, dtype=np.int64)
    for i in range(n):
        idx = first + i
        if dim == 1:
            lo, hi, nj = _walk_1d(seed, idx, t)
            sizes[i] = hi - lo + 1
            jumps[i] = nj
            maxd[i] = max(-lo, hi)
        elif not want_sausage:
            state = stream_start(seed, idx)
            pos = np.zeros(dim, dtype=np.int64)
            time = 0.0
            nj = 0
            m = 0
            while True:
                state, time, axis, sign = _step(state, t, time, dim)
                if axis < 0:
                    break
                nj += 1
                pos[axis] += sign
                a = abs(pos[axis])
                if a > m:
                    m = a
            jumps[i] = nj
            maxd[i] = m
            sizes[i] = -1
        else:
            nj = _count_jumps(seed, idx, t, dim)
            keys, stamp = _ensure(keys, stamp, nj, dim)
            s, nj, m, _ = _fill(seed, idx, t, dim, zero, keys, stamp, idx + 1, empty_k, empty_s, 0)
            sizes[i] = s
            jumps[i] = nj
            maxd[i] = m
    return sizes, jumps, maxd


@nb.njit(cache=True)
def pair_batch(seed, first, n, dim, t, shift, cap):
    """Two independent walks per sample, the first from 0 and the second from ``shift``.

    Sample ``i`` uses substreams ``2 i`` and ``2 i + 1``.  Returns sausage
    sizes of both walks, the size of their intersection, and both sup-norm
    maximal displacements measured from each walk's own start.
    """
    sx = np.zeros(n, dtype=np.int64)
    sy = np.zeros(n, dtype=np.int64)
    inter = np.zeros(n, dtype=np.int64)
    mx = np.zeros(n, dtype=np.int64)
    my = np.zeros(n, dtype=np.int64)
    ka = np.zeros((cap, dim), dtype=np.int64)
    sa = np.zeros(cap, dtype=np.int64)
    kb = np.zeros((cap, dim), dtype=np.int64)
    sb = np.zeros(cap, dtype=np.int64)
    zero = np.zeros(dim, dtype=np.int64)
    for i in range(n):
        ix = 2 * (first + i)
        iy = ix + 1
        if dim == 1:
            lo1, hi1, _ = _walk_1d(seed, ix, t)
            lo2, hi2, _ = _walk_1d(seed, iy, t)
            sx[i] = hi1 - lo1 + 1
            sy[i] = hi2 - lo2 + 1
            lo = max(lo1, lo2 + shift[0])
            hi = min(hi1, hi2 + shift[0])
            inter[i] = max(0, hi - lo + 1)
            mx[i] = max(-lo1, hi1)
            my[i] = max(-lo2, hi2)
            continue
        nx = _count_jumps(seed, ix, t, dim)
        ny = _count_jumps(seed, iy, t, dim)
        ka, sa = _ensure(ka, sa, nx, dim)
        kb, sb = _ensure(kb, sb, ny, dim)
        cur = first + i + 1
        s1, _, m1, _ = _fill(seed, ix, t, dim, zero, ka, sa, cur, kb, sb, 0)
        s2, _, m2, ov = _fill(seed, iy, t, dim, shift, kb, sb, cur, ka, sa, cur)
        sx[i] = s1
        sy[i] = s2
        inter[i] = ov
        mx[i] = m1
        my[i] = m2
    return sx, sy, inter, mx, my


@nb.njit(cache=True)
def killed_batch(seed, first, n, occ, radius, dim, start, t):
    """Outcome codes of walks among obstacles: 0 survived, 1 killed, 2 left the box.

    ``occ`` is the flattened C-order occupancy of the box of ``radius``.
    """
    side = 2 * radius + 1
    strides = np.ones(dim, dtype=np.int64)
    for i in range(dim - 2, -1, -1):
        strides[i] = strides[i + 1] * side
    out = np.zeros(n, dtype=np.int8)
    pos = np.zeros(dim, dtype=np.int64)
    for i in range(n):
        for c in range(dim):
            pos[c] = start[c]
        state = stream_start(seed, first + i)
        time = 0.0
        code = 0
        while True:
            state, time, axis, sign = _step(state, t, time, dim)
            if axis < 0:
                break
            pos[axis] += sign
            if abs(pos[axis]) > radius:
                code = 2
                break
            flat = 0
            for c in range(dim):
                flat += (pos[c] + radius) * strides[c]
            if occ[flat]:
                code = 1
                break
        out[i] = code
    return out
