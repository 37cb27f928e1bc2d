"""Compiled wedge-propagation kernel for saddle-connection enumeration.

The kernel walks, from each start corner, a depth-first tree of open
direction wedges through the triangulation. A node is the wedge together
with the triangle edge it exits through; when the vertex opposite that edge
lies strictly inside the wedge it is a saddle-connection endpoint and the
wedge splits in two. Subtrees whose exit segment is farther than ``L`` are
pruned, which makes the search output-sensitive.

Homology coordinates of each emitted connection are tracked incrementally:
``c_right`` / ``c_left`` are the classes of the straight paths from the
source to the right / left endpoint of the current exit edge.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _grow_f(a):
    b = np.empty((a.shape[0] * 2, a.shape[1]), dtype=np.float64)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_i(a):
    b = np.empty((a.shape[0] * 2, a.shape[1]), dtype=np.int64)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_1(a):
    b = np.empty(a.shape[0] * 2, dtype=np.int64)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def _seg_dist(rx, ry, lx, ly, ax, ay, bx, by):
    """Distance from the origin to the part of segment [a, b] inside wedge (r, l)."""
    dx = bx - ax
    dy = by - ay
    lo = 0.0
    hi = 1.0
    den = rx * dy - ry * dx
    if den != 0.0:
        lam = -(rx * ay - ry * ax) / den
        if lam > lo:
            lo = lam
    den = lx * dy - ly * dx
    if den != 0.0:
        lam = -(lx * ay - ly * ax) / den
        if lam < hi:
            hi = lam
    if lo > 1.0:
        lo = 1.0
    if hi < 0.0:
        hi = 0.0
    if hi < lo:
        mid = 0.5 * (lo + hi)
        lo = mid
        hi = mid
    px = ax + lo * dx
    py = ay + lo * dy
    qx = ax + hi * dx
    qy = ay + hi * dy
    ex = qx - px
    ey = qy - py
    ee = ex * ex + ey * ey
    if ee <= 0.0:
        return np.sqrt(px * px + py * py)
    s = -(px * ex + py * ey) / ee
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    cx = px + s * ex
    cy = py + s * ey
    return np.sqrt(cx * cx + cy * cy)


@njit(cache=True)
def enumerate_kernel(vec, pt, pk, coords, starts, L, budget, tol):
    """Enumerate oriented saddle connections of length at most ``L``.

    Parameters
    ----------
    vec : (F, 3, 2) float64
        Triangle edge vectors.
    pt, pk : (F, 3) int64
        Partner triangle and edge of each half-edge.
    coords : (F, 3, h) int64
        Homology coordinates of each half-edge (``h`` may be 0).
    starts : (S, 2) int64
        Start corners ``(t, k)``; corner ``k`` is the start vertex of edge ``k``.
    L : float
        Length cutoff.
    budget : int
        Maximum number of wedge expansions.
    tol : float
        Relative collinearity tolerance.

    Returns
    -------
    hol, start, end, chain, path_off, path_data, expansions, complete
    """
    h = coords.shape[2]
    L2 = L * L
    cap = 256
    hol = np.empty((cap, 2), dtype=np.float64)
    sc_start = np.empty((cap, 2), dtype=np.int64)
    sc_end = np.empty((cap, 2), dtype=np.int64)
    chain = np.zeros((cap, max(h, 1)), dtype=np.int64)
    path_off = np.zeros(cap + 1, dtype=np.int64)
    path_data = np.empty((1024, 2), dtype=np.int64)
    n_out = 0
    n_path = 0

    scap = 256
    sf = np.empty((scap, 8), dtype=np.float64)
    si = np.empty((scap, 3), dtype=np.int64)
    sc = np.zeros((scap, 2 * max(h, 1)), dtype=np.int64)
    cur = np.empty((256, 2), dtype=np.int64)
    expansions = 0
    complete = True

    for s_idx in range(starts.shape[0]):
        t0 = starts[s_idx, 0]
        k0 = starts[s_idx, 1]
        k1 = (k0 + 1) % 3
        k2 = (k0 + 2) % 3
        ex = vec[t0, k0, 0]
        ey = vec[t0, k0, 1]
        if ex * ex + ey * ey <= L2:
            if n_out >= hol.shape[0]:
                hol = _grow_f(hol)
                sc_start = _grow_i(sc_start)
                sc_end = _grow_i(sc_end)
                chain = _grow_i(chain)
                path_off = _grow_1(path_off)
            hol[n_out, 0] = ex
            hol[n_out, 1] = ey
            sc_start[n_out, 0] = t0
            sc_start[n_out, 1] = k0
            sc_end[n_out, 0] = t0
            sc_end[n_out, 1] = k1
            for q in range(h):
                chain[n_out, q] = coords[t0, k0, q]
            n_out += 1
            path_off[n_out] = n_path
        # initial wedge: between edge k0 and the direction to vertex k0 + 2
        top = 0
        sf[0, 0] = ex
        sf[0, 1] = ey
        sf[0, 2] = -vec[t0, k2, 0]
        sf[0, 3] = -vec[t0, k2, 1]
        sf[0, 4] = ex
        sf[0, 5] = ey
        sf[0, 6] = -vec[t0, k2, 0]
        sf[0, 7] = -vec[t0, k2, 1]
        si[0, 0] = t0
        si[0, 1] = k1
        si[0, 2] = 0
        for q in range(h):
            sc[0, q] = coords[t0, k0, q]
            sc[0, h + q] = -coords[t0, k2, q]
        top = 1
        while top > 0:
            top -= 1
            expansions += 1
            if expansions > budget:
                complete = False
                break
            rx = sf[top, 0]
            ry = sf[top, 1]
            lx = sf[top, 2]
            ly = sf[top, 3]
            qrx = sf[top, 4]
            qry = sf[top, 5]
            qlx = sf[top, 6]
            qly = sf[top, 7]
            t = si[top, 0]
            e = si[top, 1]
            depth = si[top, 2]
            if depth >= cur.shape[0]:
                cur = _grow_i(cur)
            cur[depth, 0] = t
            cur[depth, 1] = e
            if _seg_dist(rx, ry, lx, ly, qrx, qry, qlx, qly) > L:
                continue
            u = pt[t, e]
            j = pk[t, e]
            j1 = (j + 1) % 3
            j2 = (j + 2) % 3
            wx = qrx + vec[u, j1, 0]
            wy = qry + vec[u, j1, 1]
            nw = np.sqrt(wx * wx + wy * wy)
            nr = np.sqrt(rx * rx + ry * ry)
            nl = np.sqrt(lx * lx + ly * ly)
            in_r = (rx * wy - ry * wx) > tol * nr * nw
            in_l = (wx * ly - wy * lx) > tol * nw * nl
            # make room for two children
            if top + 2 >= sf.shape[0]:
                sf = _grow_f(sf)
                si = _grow_i(si)
                sc = _grow_i(sc)
            if in_r and in_l:
                if wx * wx + wy * wy <= L2:
                    if n_out >= hol.shape[0]:
                        hol = _grow_f(hol)
                        sc_start = _grow_i(sc_start)
                        sc_end = _grow_i(sc_end)
                        chain = _grow_i(chain)
                        path_off = _grow_1(path_off)
                    hol[n_out, 0] = wx
                    hol[n_out, 1] = wy
                    sc_start[n_out, 0] = t0
                    sc_start[n_out, 1] = k0
                    sc_end[n_out, 0] = u
                    sc_end[n_out, 1] = j2
                    for q in range(h):
                        chain[n_out, q] = sc[top, q] + coords[u, j1, q]
                    while n_path + depth + 1 > path_data.shape[0]:
                        path_data = _grow_i(path_data)
                    for dd in range(depth + 1):
                        path_data[n_path, 0] = cur[dd, 0]
                        path_data[n_path, 1] = cur[dd, 1]
                        n_path += 1
                    n_out += 1
                    path_off[n_out] = n_path
                # right child goes on top (slot b), left child reuses the popped slot
                b = top + 1
                sf[b, 0] = rx
                sf[b, 1] = ry
                sf[b, 2] = wx
                sf[b, 3] = wy
                sf[b, 4] = qrx
                sf[b, 5] = qry
                sf[b, 6] = wx
                sf[b, 7] = wy
                si[b, 0] = u
                si[b, 1] = j1
                si[b, 2] = depth + 1
                for q in range(h):
                    sc[b, q] = sc[top, q]
                    sc[b, h + q] = sc[top, q] + coords[u, j1, q]
                sf[top, 0] = wx
                sf[top, 1] = wy
                sf[top, 4] = wx
                sf[top, 5] = wy
                si[top, 0] = u
                si[top, 1] = j2
                si[top, 2] = depth + 1
                for q in range(h):
                    sc[top, q] = sc[top, h + q] - coords[u, j2, q]
                top += 2
            elif not in_r:
                # the whole wedge passes left of w: exit through (u, j2)
                sf[top, 4] = wx
                sf[top, 5] = wy
                si[top, 0] = u
                si[top, 1] = j2
                si[top, 2] = depth + 1
                for q in range(h):
                    sc[top, q] = sc[top, h + q] - coords[u, j2, q]
                top += 1
            else:
                # the whole wedge passes right of w: exit through (u, j1)
                sf[top, 6] = wx
                sf[top, 7] = wy
                si[top, 0] = u
                si[top, 1] = j1
                si[top, 2] = depth + 1
                for q in range(h):
                    sc[top, h + q] = sc[top, q] + coords[u, j1, q]
                top += 1
        if not complete:
            break

    return (
        hol[:n_out].copy(),
        sc_start[:n_out].copy(),
        sc_end[:n_out].copy(),
        chain[:n_out, :h].copy(),
        path_off[: n_out + 1].copy(),
        path_data[:n_path].copy(),
        expansions,
        complete,
    )


@njit(cache=True)
def min_edge_length(vec):
    best = np.inf
    for t in range(vec.shape[0]):
        for k in range(3):
            v = vec[t, k, 0] * vec[t, k, 0] + vec[t, k, 1] * vec[t, k, 1]
            if v < best:
                best = v
    return np.sqrt(best)
