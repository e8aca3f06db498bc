"""Integer maximum flow (Dinic) on a compressed arc list, compiled with numba.

Capacities are int64, so exact scaled weights up to ~1e12 per arc and totals
up to 2^62 are safe. scipy's ``maximum_flow`` works in int32 and overflows
on such inputs.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _bfs_levels(n, start, head, cap, s, t, level, queue):
    level[:] = -1
    level[s] = 0
    qh = 0
    qt = 1
    queue[0] = s
    while qh < qt:
        v = queue[qh]
        qh += 1
        for a in range(start[v], start[v + 1]):
            u = head[a]
            if cap[a] > 0 and level[u] < 0:
                level[u] = level[v] + 1
                queue[qt] = u
                qt += 1
    return level[t] >= 0


@numba.njit(cache=True)
def _dinic(n, start, head, cap, rev, s, t):
    level = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    flow = 0
    while _bfs_levels(n, start, head, cap, s, t, level, queue):
        for v in range(n):
            it[v] = start[v]
        v = s
        depth = 0
        while True:
            if v == t:
                b = cap[path[0]]
                for k in range(1, depth):
                    if cap[path[k]] < b:
                        b = cap[path[k]]
                for k in range(depth):
                    cap[path[k]] -= b
                    cap[rev[path[k]]] += b
                flow += b
                for k in range(depth):
                    if cap[path[k]] == 0:
                        depth = k
                        break
                v = head[rev[path[depth]]]
                continue
            a = it[v]
            end = start[v + 1]
            lv = level[v] + 1
            while a < end:
                if cap[a] > 0 and level[head[a]] == lv:
                    break
                a += 1
            it[v] = a
            if a < end:
                path[depth] = a
                depth += 1
                v = head[a]
            else:
                if v == s:
                    break
                level[v] = -1
                depth -= 1
                v = head[rev[path[depth]]]
                it[v] += 1
    return flow


@numba.njit(cache=True)
def _reaches_sink(n, start, head, cap, rev, t):
    seen = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    seen[t] = True
    queue[0] = t
    qh = 0
    qt = 1
    while qh < qt:
        v = queue[qh]
        qh += 1
        for b in range(start[v], start[v + 1]):
            u = head[b]
            if not seen[u] and cap[rev[b]] > 0:
                seen[u] = True
                queue[qt] = u
                qt += 1
    return seen


def min_cut(n_nodes: int, tails, heads, caps, pair_caps=None, s=None, t=None):
    """Maximum flow value and sink-side indicator of the minimal sink-side cut.

    ``tails/heads/caps`` are directed arcs with zero-capacity reverses added
    automatically. ``pair_caps`` given as ``(i, j, w)`` adds the two arcs
    ``i -> j`` and ``j -> i`` of capacity ``w`` that serve as each other's
    reverse. Nodes that can still reach the sink in the residual graph are on
    the sink side; everything else (including ties) is on the source side.
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    caps = np.asarray(caps, dtype=np.int64)
    m1 = len(tails)
    src = [tails, heads]
    dst = [heads, tails]
    cap = [caps, np.zeros(m1, np.int64)]
    rev_parts = [np.arange(m1, 2 * m1), np.arange(0, m1)]
    m = 2 * m1
    if pair_caps is not None:
        pi, pj, pw = (np.asarray(v) for v in pair_caps)
        pi = pi.astype(np.int64)
        pj = pj.astype(np.int64)
        pw = pw.astype(np.int64)
        k = len(pi)
        src += [pi, pj]
        dst += [pj, pi]
        cap += [pw, pw]
        rev_parts += [np.arange(m + k, m + 2 * k), np.arange(m, m + k)]
        m += 2 * k
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    cap = np.concatenate(cap)
    rev = np.concatenate(rev_parts)
    order = np.argsort(src, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(len(order))
    head = dst[order]
    cap = cap[order].copy()
    rev = pos[rev[order]]
    start = np.zeros(n_nodes + 1, np.int64)
    np.add.at(start, src + 1, 1)
    start = np.cumsum(start)
    s = n_nodes - 2 if s is None else s
    t = n_nodes - 1 if t is None else t
    flow = _dinic(n_nodes, start, head, cap, rev, s, t)
    sink_side = _reaches_sink(n_nodes, start, head, cap, rev, t)
    return int(flow), sink_side
