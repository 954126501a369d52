# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: grid union-find clustering, bulk nearest-node
queries, and grouped range maxima. Mirrors percap._kernels_py."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "c"


cdef inline long _find(long* parent, long i) nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def cluster_labels(double[::1] xs, double[::1] ys, long[::1] order,
                   long[::1] start, long nx, long ny, double r):
    """Union-find labels of the r-disk graph over a CSR bucket grid."""
    cdef long n = xs.shape[0]
    out = np.arange(n, dtype=np.int64)
    cdef long[::1] parent_mv = out
    cdef long* parent = &parent_mv[0]
    cdef double r2 = r * r
    cdef long ix, iy, c, a, b, i, j, ri, rj, jx, jy, o
    cdef long a0, a1, b0, b1
    cdef double dx, dy
    cdef long[4][2] offs
    offs[0][0] = 1; offs[0][1] = 0
    offs[1][0] = 0; offs[1][1] = 1
    offs[2][0] = 1; offs[2][1] = 1
    offs[3][0] = 1; offs[3][1] = -1
    with nogil:
        for ix in range(nx):
            for iy in range(ny):
                c = ix * ny + iy
                a0 = start[c]; a1 = start[c + 1]
                if a0 == a1:
                    continue
                for a in range(a0, a1):
                    i = order[a]
                    for b in range(a + 1, a1):
                        j = order[b]
                        dx = xs[i] - xs[j]; dy = ys[i] - ys[j]
                        if dx * dx + dy * dy <= r2:
                            ri = _find(parent, i); rj = _find(parent, j)
                            if ri != rj:
                                parent[rj] = ri
                for o in range(4):
                    jx = ix + offs[o][0]; jy = iy + offs[o][1]
                    if jx < 0 or jx >= nx or jy < 0 or jy >= ny:
                        continue
                    b0 = start[jx * ny + jy]; b1 = start[jx * ny + jy + 1]
                    for a in range(a0, a1):
                        i = order[a]
                        for b in range(b0, b1):
                            j = order[b]
                            dx = xs[i] - xs[j]; dy = ys[i] - ys[j]
                            if dx * dx + dy * dy <= r2:
                                ri = _find(parent, i); rj = _find(parent, j)
                                if ri != rj:
                                    parent[rj] = ri
        for i in range(n):
            parent[i] = _find(parent, i)
    return out


def nearest_bulk(double[::1] xs, double[::1] ys, long[::1] order,
                 long[::1] start, long nx, long ny, double cell_size,
                 double[::1] qx, double[::1] qy):
    """Nearest point index per query via expanding-ring grid search.

    Ties resolve to the lowest point index (candidates are scanned in CSR
    order within each bucket and strict inequality is required to replace).
    """
    cdef long nq = qx.shape[0]
    out = np.empty(nq, dtype=np.int64)
    cdef long[::1] res = out
    cdef long q, ix, iy, ring, jx, jy, a, i, best
    cdef long x0, x1, y0, y1, maxring
    cdef double bx, by, d2, bestd2, ringdist
    maxring = nx if nx > ny else ny
    with nogil:
        for q in range(nq):
            bx = qx[q]; by = qy[q]
            ix = <long>(bx / cell_size)
            if ix < 0: ix = 0
            if ix >= nx: ix = nx - 1
            iy = <long>(by / cell_size)
            if iy < 0: iy = 0
            if iy >= ny: iy = ny - 1
            best = -1
            bestd2 = 1e300
            for ring in range(maxring + 1):
                if best >= 0:
                    # all points in farther rings are at least this far away
                    ringdist = (ring - 1) * cell_size
                    if ringdist > 0 and ringdist * ringdist > bestd2:
                        break
                x0 = ix - ring; x1 = ix + ring
                y0 = iy - ring; y1 = iy + ring
                for jx in range(x0, x1 + 1):
                    if jx < 0 or jx >= nx:
                        continue
                    for jy in range(y0, y1 + 1):
                        if jy < 0 or jy >= ny:
                            continue
                        # ring shell only
                        if ring > 0 and jx != x0 and jx != x1 and jy != y0 and jy != y1:
                            continue
                        for a in range(start[jx * ny + jy], start[jx * ny + jy + 1]):
                            i = order[a]
                            d2 = (xs[i] - bx) * (xs[i] - bx) + (ys[i] - by) * (ys[i] - by)
                            if d2 < bestd2 or (d2 == bestd2 and i < best):
                                bestd2 = d2
                                best = i
            res[q] = best
    return out


def range_max(double[::1] values, long[::1] starts, long[::1] ends,
              long[::1] groups, long ngroups):
    """Per-group maximum of ``values`` over index ranges [start, end)."""
    out = np.zeros(ngroups, dtype=np.float64)
    cdef double[::1] acc = out
    cdef long k, s, e, g, i
    cdef double m
    with nogil:
        for k in range(starts.shape[0]):
            s = starts[k]; e = ends[k]; g = groups[k]
            if e <= s:
                continue
            m = values[s]
            for i in range(s + 1, e):
                if values[i] > m:
                    m = values[i]
            if m > acc[g]:
                acc[g] = m
    return out
