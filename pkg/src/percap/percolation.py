"""Poisson Boolean model clustering and open-cell crossing paths.

Connectivity convention: two nodes are directly connected iff their distance
is at most r (disks of radius r/2 overlap). gamma = lambda * pi * r^2 is the
dimensionless control parameter; the critical value is never hardcoded, test
workloads stay outside its known bracket on either side.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from percap import kernels
from percap.errors import ParameterError, StateError
from percap.spatial import Deployment, GridIndex, SchemeLattice

DEFAULT_GIANT_FRACTION = 0.5


@dataclass
class ClusterLabeling:
    """Connected components of the r-disk graph over a deployment.

    Cluster ids are dense and ordered by each cluster's minimum node index,
    so labelings are identical across kernel backends.
    """

    radius_r: float
    gamma: float
    cluster_of: np.ndarray
    sizes: np.ndarray
    giant_id: Optional[int]
    giant_fraction: float

    @property
    def num_clusters(self) -> int:
        return int(self.sizes.shape[0])

    @property
    def largest_size(self) -> int:
        return int(self.sizes.max()) if self.sizes.size else 0

    def giant_mask(self) -> np.ndarray:
        if self.giant_id is None:
            raise StateError("labeling has no giant cluster")
        return self.cluster_of == self.giant_id


def cluster(d: Deployment, r: float,
            giant_fraction: float = DEFAULT_GIANT_FRACTION) -> ClusterLabeling:
    """Union-find labeling of the r-disk graph with grid bucketing."""
    if r <= 0:
        raise ParameterError("r must be positive")
    n = d.count
    gamma = d.lam * math.pi * r * r
    if n == 0:
        return ClusterLabeling(r, gamma, np.empty(0, np.int64),
                               np.empty(0, np.int64), None, giant_fraction)
    g = d.grid(min(r, d.side) if d.side > 0 else r)
    roots = kernels.cluster_labels(g.xs, g.ys, g.order, g.start, g.nx, g.ny, float(r))
    uniq, inv = np.unique(roots, return_inverse=True)
    first = np.full(uniq.shape[0], n, dtype=np.int64)
    np.minimum.at(first, inv, np.arange(n, dtype=np.int64))
    remap = np.empty(uniq.shape[0], dtype=np.int64)
    remap[np.argsort(first, kind="stable")] = np.arange(uniq.shape[0], dtype=np.int64)
    cluster_of = remap[inv]
    sizes = np.bincount(cluster_of)
    giant_id: Optional[int] = None
    big = int(np.argmax(sizes))
    if sizes[big] >= giant_fraction * n:
        giant_id = big
    return ClusterLabeling(float(r), float(gamma), cluster_of, sizes,
                           giant_id, float(giant_fraction))


@dataclass
class ExteriorStats:
    """Distances from nodes outside the giant cluster to the giant cluster."""

    exterior_nodes: np.ndarray
    distances: np.ndarray
    max_distance: float
    scaled_max: float


def exterior_stats(d: Deployment, cl: ClusterLabeling) -> ExteriorStats:
    """Min distance to the giant cluster per exterior node, plus the maximum
    and the dimensionless statistic lambda * r * max / log(n)."""
    if cl.giant_id is None:
        raise StateError("no giant cluster in labeling")
    ext = np.flatnonzero(~cl.giant_mask()).astype(np.int64)
    if ext.size == 0:
        return ExteriorStats(ext, np.empty(0, np.float64), 0.0, 0.0)
    giant = np.flatnonzero(cl.giant_mask()).astype(np.int64)
    gp = d.points[giant]
    # bucket size tuned to the giant subset; exactness is backend-checked
    target = max(1, int(math.sqrt(gp.shape[0] / 2.0)))
    gi = GridIndex(gp, d.side / target if d.side > 0 else 1.0, d.side)
    qx = np.ascontiguousarray(d.points[ext, 0])
    qy = np.ascontiguousarray(d.points[ext, 1])
    near = kernels.nearest_bulk(gi.xs, gi.ys, gi.order, gi.start,
                                gi.nx, gi.ny, gi.cell_size, qx, qy)
    dist = np.hypot(gi.xs[near] - qx, gi.ys[near] - qy)
    max_d = float(dist.max())
    scaled = d.lam * cl.radius_r * max_d / math.log(d.n)
    return ExteriorStats(ext, dist, max_d, float(scaled))


def connectivity_radius_check(d: Deployment, r: float) -> bool:
    """True iff the r-disk graph over all realized nodes is connected."""
    if r <= 0:
        raise ParameterError("r must be positive")
    if d.count <= 1:
        return True
    return cluster(d, r).num_clusters == 1


def exterior_tail_exponent(distances: np.ndarray, lam: float, r: float) -> float:
    """Empirical decay constant of P[distance > x] ~ exp(-eps * lam * r * x).

    Reported for diagnostics only; the constant is never asserted against a
    literature value.
    """
    dd = np.sort(np.asarray(distances, dtype=np.float64))
    dd = dd[dd > 0]
    if dd.size < 8:
        raise ParameterError("need at least 8 positive distances to fit")
    ccdf = 1.0 - (np.arange(dd.size) + 0.5) / dd.size
    x = lam * r * dd
    y = np.log(ccdf)
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def open_cells(lat: SchemeLattice, d: Deployment) -> np.ndarray:
    """Boolean occupancy grid: cell is open iff it contains >= 1 node."""
    occ = np.zeros((lat.rows, lat.cols), dtype=bool)
    if d.count:
        row, col = lat.cell_of(d.points)
        occ[row, col] = True
    return occ


def _dinic_max_disjoint(sub: np.ndarray):
    """Maximum vertex-disjoint left-right paths in a boolean grid (Dinic).

    Every open cell is split into an in/out node of capacity 1, so the flow
    value equals the Menger number and each unit decomposes into a simple
    cell-disjoint path. Returns paths as lists of (row, col) in ``sub``.
    """
    h, w = sub.shape
    ids = np.full((h, w), -1, dtype=np.int64)
    cells = np.argwhere(sub)
    for idx, (r, c) in enumerate(cells):
        ids[r, c] = idx
    k = len(cells)
    if k == 0:
        return []
    source, sink = 2 * k, 2 * k + 1
    graph = [[] for _ in range(2 * k + 2)]
    to, cap = [], []

    def add_edge(u, v):
        graph[u].append(len(to)); to.append(v); cap.append(1)
        graph[v].append(len(to)); to.append(u); cap.append(0)

    for idx, (r, c) in enumerate(cells):
        add_edge(2 * idx, 2 * idx + 1)
        if c == 0:
            add_edge(source, 2 * idx)
        if c == w - 1:
            add_edge(2 * idx + 1, sink)
        for dr, dc in ((0, 1), (1, 0), (-1, 0), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and ids[nr, nc] >= 0:
                add_edge(2 * idx + 1, 2 * ids[nr, nc])

    n_nodes = 2 * k + 2
    while True:
        level = [-1] * n_nodes
        level[source] = 0
        queue = [source]
        for u in queue:
            for e in graph[u]:
                if cap[e] and level[to[e]] < 0:
                    level[to[e]] = level[u] + 1
                    queue.append(to[e])
        if level[sink] < 0:
            break
        it = [0] * n_nodes

        def dfs(u):
            if u == sink:
                return True
            while it[u] < len(graph[u]):
                e = graph[u][it[u]]
                v = to[e]
                if cap[e] and level[v] == level[u] + 1 and dfs(v):
                    cap[e] -= 1
                    cap[e ^ 1] += 1
                    return True
                it[u] += 1
            return False

        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, n_nodes + 100))
        try:
            while dfs(source):
                pass
        finally:
            sys.setrecursionlimit(old)

    # decompose the integral flow into vertex-disjoint paths
    paths = []
    for e in graph[source]:
        if cap[e] or to[e] == source:
            continue
        u = to[e]  # saturated source edge -> in-node of a col-0 cell
        path = []
        while u != sink:
            idx = u // 2
            path.append((int(cells[idx][0]), int(cells[idx][1])))
            nxt = None
            for e2 in graph[u + 1]:
                if cap[e2] == 0 and to[e2] != u and to[e2] % 2 == 0:
                    nxt = e2
                    break
                if to[e2] == sink and cap[e2] == 0:
                    nxt = e2
                    break
            cap[nxt] = 1  # consume so shared junctions are not re-walked
            u = to[nxt]
        paths.append(path)
    return paths


def disjoint_crossing_paths(grid: np.ndarray, slab, direction: str = "horizontal"):
    """Maximum set of vertex-disjoint open crossing paths through a slab.

    ``grid`` is a boolean occupancy matrix; ``slab`` is a (first, last+1) row
    range for horizontal crossings (column range for vertical). Paths are
    sequences of edge-adjacent open cells from one side of the grid to the
    other, pairwise sharing no cell; the count is the Menger number of the
    slab. Returns a possibly empty list of paths as lists of (row, col) in
    the original grid orientation.
    """
    if direction == "vertical":
        flipped = disjoint_crossing_paths(grid.T, slab, "horizontal")
        return [[(r, c) for (c, r) in path] for path in flipped]
    if direction != "horizontal":
        raise ParameterError("direction must be 'horizontal' or 'vertical'")
    r0, r1 = int(slab[0]), int(slab[1])
    sub = np.array(grid[r0:r1, :], dtype=bool)
    if sub.size == 0:
        return []
    paths = _dinic_max_disjoint(sub)
    paths.sort(key=lambda p: p[0][0])
    return [[(r + r0, c) for r, c in path] for path in paths]


def cluster_summary_row(seed: int, d: Deployment, cl: ClusterLabeling,
                        stats: Optional[ExteriorStats]) -> dict:
    """One exportable summary row for a clustering run.

    Without a giant cluster the exterior statistics are 0 by convention so
    that exported values stay finite.
    """
    return {
        "seed": seed,
        "n": d.n,
        "lambda": d.lam,
        "r": cl.radius_r,
        "gamma": cl.gamma,
        "largest_cluster": cl.largest_size,
        "num_clusters": cl.num_clusters,
        "max_exterior_distance": stats.max_distance if stats is not None else 0.0,
        "scaled_max": stats.scaled_max if stats is not None else 0.0,
    }
