"""Pure numpy/scipy implementations of the hot kernels.

Same contracts as the compiled backend in ``_corekern``; selected at import
time by :mod:`percap.kernels` when the extension is unavailable (or when
``PERCAP_BACKEND=py`` is set).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

BACKEND = "py"

# forward half-plane of the 8-neighbourhood; within-cell pairs handled apart
_FWD_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))


def _find(parent: np.ndarray, i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]  # path halving
        i = parent[i]
    return i


def cluster_labels(xs, ys, order, start, nx, ny, r) -> np.ndarray:
    """Union-find labels of the r-disk graph using a bucket grid.

    ``order``/``start`` describe a CSR layout of point indices by grid cell
    (cell id = ix * ny + iy, bucket side >= r). Returns the root index per
    point (not canonicalized).
    """
    n = xs.shape[0]
    parent = np.arange(n, dtype=np.int64)
    r2 = r * r
    for ix in range(nx):
        for iy in range(ny):
            c = ix * ny + iy
            a0, a1 = start[c], start[c + 1]
            if a0 == a1:
                continue
            pa = order[a0:a1]
            axs, ays = xs[pa], ys[pa]
            # pairs within the bucket
            if a1 - a0 > 1:
                dx = axs[:, None] - axs[None, :]
                dy = ays[:, None] - ays[None, :]
                ii, jj = np.nonzero(np.triu(dx * dx + dy * dy <= r2, k=1))
                for i, j in zip(pa[ii], pa[jj]):
                    ri, rj = _find(parent, i), _find(parent, j)
                    if ri != rj:
                        parent[rj] = ri
            # pairs against forward neighbour buckets
            for ox, oy in _FWD_OFFSETS:
                jx, jy = ix + ox, iy + oy
                if not (0 <= jx < nx and 0 <= jy < ny):
                    continue
                b0, b1 = start[jx * ny + jy], start[jx * ny + jy + 1]
                if b0 == b1:
                    continue
                pb = order[b0:b1]
                dx = axs[:, None] - xs[pb][None, :]
                dy = ays[:, None] - ys[pb][None, :]
                ii, jj = np.nonzero(dx * dx + dy * dy <= r2)
                for i, j in zip(pa[ii], pb[jj]):
                    ri, rj = _find(parent, i), _find(parent, j)
                    if ri != rj:
                        parent[rj] = ri
    # flatten to roots
    for i in range(n):
        parent[i] = _find(parent, i)
    return parent


def nearest_bulk(xs, ys, order, start, nx, ny, cell_size, qx, qy) -> np.ndarray:
    """Index of the nearest point for each query location.

    The grid arguments are accepted for signature parity with the compiled
    backend; this implementation queries a KD-tree instead.
    """
    tree = cKDTree(np.column_stack([xs, ys]))
    _, idx = tree.query(np.column_stack([qx, qy]), k=1)
    return np.asarray(idx, dtype=np.int64)


def range_max(values, starts, ends, groups, ngroups) -> np.ndarray:
    """Per-group maximum of values over index ranges [start, end)."""
    out = np.zeros(ngroups, dtype=values.dtype)
    for s, e, g in zip(starts, ends, groups):
        if e > s:
            m = values[s:e].max()
            if m > out[g]:
                out[g] = m
    return out
