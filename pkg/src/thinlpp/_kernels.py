"""Integer dynamic-programming kernels (numba-compiled hot paths)."""
from __future__ import annotations

import numpy as np
from numba import njit

# Sentinel for unreachable cells; far below any achievable path sum and far
# above int64 overflow when a handful of weights get added to it.
NEG = np.int64(-(1 << 61))


@njit(cache=True)
def dp_forward(w):
    """Best path sum from the origin to each cell, up-right steps only."""
    rows, n = w.shape
    G = np.empty((rows, n), dtype=np.int64)
    for y in range(rows):
        for x in range(n):
            left = G[y, x - 1] if x > 0 else NEG
            below = G[y - 1, x] if y > 0 else NEG
            best = left if left > below else below
            if best == NEG:  # origin
                best = 0
            G[y, x] = w[y, x] + best
    return G


@njit(cache=True)
def dp_forward_masked(w, admissible):
    """Forward table restricted to an admissible mask; blocked cells get NEG."""
    rows, n = w.shape
    G = np.empty((rows, n), dtype=np.int64)
    cut = NEG // 2
    for y in range(rows):
        for x in range(n):
            if not admissible[y, x]:
                G[y, x] = NEG
                continue
            left = G[y, x - 1] if x > 0 else NEG
            below = G[y - 1, x] if y > 0 else NEG
            best = left if left > below else below
            if x == 0 and y == 0:
                G[y, x] = w[y, x]
            elif best < cut:  # both neighbors unreachable
                G[y, x] = NEG
            else:
                G[y, x] = w[y, x] + best
    return G


@njit(cache=True)
def flip_update(w, G, y0, x0, new_val):
    """Raise w[y0, x0] to new_val and repair G in place on the affected cone.

    Propagates column by column, stopping as soon as a whole column is stable.
    Assumes new_val >= w[y0, x0].
    """
    rows, n = w.shape
    w[y0, x0] = new_val
    start = y0
    for x in range(x0, n):
        min_changed = rows
        for y in range(start, rows):
            left = G[y, x - 1] if x > 0 else NEG
            below = G[y - 1, x] if y > 0 else NEG
            best = left if left > below else below
            if best == NEG:
                best = 0
            v = w[y, x] + best
            if v != G[y, x]:
                G[y, x] = v
                if y < min_changed:
                    min_changed = y
        if min_changed == rows:
            return
        start = min_changed


@njit(cache=True)
def trajectory_fill(base, flip_vals, order_sites, out):
    """Sink values along a flip sequence, by incremental repair.

    base: starting weight grid (mutated); flip_vals: per-site replacement
    values indexed by site id; order_sites: flip order as row-major site ids;
    out: int64 array of length len(order_sites) + 1.
    """
    rows, n = base.shape
    G = dp_forward(base)
    out[0] = G[rows - 1, n - 1]
    for k in range(order_sites.shape[0]):
        s = order_sites[k]
        y = s // n
        x = s - y * n
        flip_update(base, G, y, x, flip_vals[s])
        out[k + 1] = G[rows - 1, n - 1]


@njit(cache=True)
def trajectory_fill_full(base, flip_vals, order_sites, out):
    """Same contract as trajectory_fill but recomputes the DP from scratch
    after every flip; the slow reference for the incremental kernel."""
    rows, n = base.shape
    G = dp_forward(base)
    out[0] = G[rows - 1, n - 1]
    for k in range(order_sites.shape[0]):
        s = order_sites[k]
        y = s // n
        x = s - y * n
        base[y, x] = flip_vals[s]
        G = dp_forward(base)
        out[k + 1] = G[rows - 1, n - 1]


def warm_up() -> None:
    """Compile every kernel on toy inputs (call before forking worker pools)."""
    w = np.array([[1, 2], [3, 4]], dtype=np.int64)
    adm = np.ones((2, 2), dtype=np.bool_)
    dp_forward(w)
    dp_forward_masked(w, adm)
    g = dp_forward(w)
    flip_update(w.copy(), g.copy(), 0, 0, np.int64(5))
    out = np.empty(5, dtype=np.int64)
    order = np.arange(4, dtype=np.int64)
    vals = np.full(4, 9, dtype=np.int64)
    trajectory_fill(w.copy(), vals, order, out)
    trajectory_fill_full(w.copy(), vals, order, out)
