"""Poisson deployments, grid indexing, scheme lattices, and Euclidean MSTs.

Geometry conventions: the deployment region is the square [0, side]^2 with
side = sqrt(n / lambda), all lengths in absolute region units. The grid
index is a uniform bucket structure (CSR layout) whose bucket side must be
at least the query radius for disk queries to stay exact with a single
neighbour ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay
from scipy.spatial import QhullError

from percap import kernels
from percap.errors import ParameterError, StateError

THETA_AXIS = 0.0
THETA_DIAG = math.pi / 4


class GridIndex:
    """Uniform bucket index over points in [0, extent]^2.

    Stores a CSR layout (``order`` sorted by cell id, ``start`` offsets) so
    the compiled kernels can walk buckets without Python overhead.
    """

    def __init__(self, points: np.ndarray, cell_size: float, extent: float):
        if cell_size <= 0:
            raise ParameterError("cell_size must be positive")
        self.cell_size = float(cell_size)
        self.extent = float(extent)
        self.nx = max(1, math.ceil(extent / cell_size))
        self.ny = self.nx
        self.xs = np.ascontiguousarray(points[:, 0], dtype=np.float64)
        self.ys = np.ascontiguousarray(points[:, 1], dtype=np.float64)
        ix = np.clip((self.xs / cell_size).astype(np.int64), 0, self.nx - 1)
        iy = np.clip((self.ys / cell_size).astype(np.int64), 0, self.ny - 1)
        cell = ix * self.ny + iy
        self.order = np.argsort(cell, kind="stable").astype(np.int64)
        counts = np.bincount(cell, minlength=self.nx * self.ny)
        self.start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    def __len__(self) -> int:
        return self.xs.shape[0]

    def bucket(self, ix: int, iy: int) -> np.ndarray:
        c = ix * self.ny + iy
        return self.order[self.start[c]:self.start[c + 1]]

    def query_disk(self, p, radius: float) -> np.ndarray:
        """Indices of all points within Euclidean distance ``radius`` of p.

        Exact: candidates are gathered from covering buckets, then filtered
        by true distance. Result is sorted ascending.
        """
        px, py = float(p[0]), float(p[1])
        cs = self.cell_size
        ix0 = max(0, int(math.floor((px - radius) / cs)))
        ix1 = min(self.nx - 1, int(math.floor((px + radius) / cs)))
        iy0 = max(0, int(math.floor((py - radius) / cs)))
        iy1 = min(self.ny - 1, int(math.floor((py + radius) / cs)))
        chunks = []
        for ix in range(ix0, ix1 + 1):
            c0 = ix * self.ny + iy0
            c1 = ix * self.ny + iy1 + 1
            chunks.append(self.order[self.start[c0]:self.start[c1]])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        if cand.size == 0:
            return cand
        d2 = (self.xs[cand] - px) ** 2 + (self.ys[cand] - py) ** 2
        hit = cand[d2 <= radius * radius + 0.0]
        hit.sort()
        return hit

    def nearest(self, p) -> int:
        """Nearest point index; exact ties resolve to the lowest index."""
        if len(self) == 0:
            raise StateError("empty index")
        px, py = float(p[0]), float(p[1])
        cs = self.cell_size
        ix = min(max(int(px / cs), 0), self.nx - 1)
        iy = min(max(int(py / cs), 0), self.ny - 1)
        best_d2 = math.inf
        best_i = -1
        for ring in range(max(self.nx, self.ny) + 1):
            if best_i >= 0 and ring >= 2:
                if ((ring - 1) * cs) ** 2 > best_d2:
                    break
            found = []
            for jx in range(ix - ring, ix + ring + 1):
                if jx < 0 or jx >= self.nx:
                    continue
                for jy in range(iy - ring, iy + ring + 1):
                    if jy < 0 or jy >= self.ny:
                        continue
                    if ring > 0 and abs(jx - ix) != ring and abs(jy - iy) != ring:
                        continue
                    found.append(self.bucket(jx, jy))
            if not found:
                continue
            cand = np.concatenate(found)
            if cand.size == 0:
                continue
            d2 = (self.xs[cand] - px) ** 2 + (self.ys[cand] - py) ** 2
            m = d2.min()
            i = int(cand[d2 == m].min())
            if m < best_d2 or (m == best_d2 and i < best_i):
                best_d2 = float(m)
                best_i = i
        return best_i


@dataclass
class Deployment:
    """A realized Poisson point set over [0, side]^2.

    Immutable after construction; grid indexes are cached per bucket size.
    """

    n: int
    lam: float
    side: float
    points: np.ndarray
    seed: int
    _grids: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def grid(self, cell_size: float) -> GridIndex:
        key = round(float(cell_size), 12)
        g = self._grids.get(key)
        if g is None:
            g = GridIndex(self.points, cell_size, self.side)
            self._grids[key] = g
        return g

    def default_grid(self) -> GridIndex:
        # ~2 points per bucket on average
        target = max(1, int(math.sqrt(self.count / 2.0))) if self.count else 1
        return self.grid(self.side / target if self.side > 0 else 1.0)


def sample_deployment(n: int, lam: float, seed: int) -> Deployment:
    """Sample a Poisson(n)-count uniform deployment over [0, sqrt(n/lam)]^2.

    The same seed with the same n reuses an identical uniform stream, so
    deployments at two densities differ only by the similarity ratio.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not (1.0 <= lam <= n):
        raise ParameterError(f"lambda must lie in [1, n], got {lam}")
    side = math.sqrt(n / lam)
    rng = np.random.default_rng(seed)
    count = int(rng.poisson(n))
    points = rng.random((count, 2)) * side
    return Deployment(n=int(n), lam=float(lam), side=side, points=points, seed=int(seed))


def nearest_node(d: Deployment, p) -> int:
    """Index of the deployment node nearest to p (lowest index on ties)."""
    if d.count == 0:
        raise StateError("deployment has no nodes")
    if d.count <= 2048:
        d2 = (d.points[:, 0] - p[0]) ** 2 + (d.points[:, 1] - p[1]) ** 2
        m = d2.min()
        return int(np.flatnonzero(d2 == m).min())
    return d.default_grid().nearest(p)


def nearest_nodes_bulk(d: Deployment, pts: np.ndarray) -> np.ndarray:
    """Vectorized nearest-node lookup for many query points."""
    if d.count == 0:
        raise StateError("deployment has no nodes")
    g = d.default_grid()
    qx = np.ascontiguousarray(pts[:, 0], dtype=np.float64)
    qy = np.ascontiguousarray(pts[:, 1], dtype=np.float64)
    return kernels.nearest_bulk(g.xs, g.ys, g.order, g.start, g.nx, g.ny,
                                g.cell_size, qx, qy)


@dataclass
class EdgeList:
    """Edges (i, j, length) of a spanning structure plus the summed length."""

    edges: list
    total_length: float


def _edge_list(pairs, lengths) -> EdgeList:
    edges = [(int(i), int(j), float(l)) for (i, j), l in zip(pairs, lengths)]
    return EdgeList(edges=edges, total_length=float(sum(l for _, _, l in edges)))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[rj] = ri
        return True


def _kruskal(k: int, cand_i, cand_j, cand_len) -> list:
    order = np.lexsort((cand_j, cand_i, cand_len))
    uf = _UnionFind(k)
    out = []
    for e in order:
        i, j = int(cand_i[e]), int(cand_j[e])
        if uf.union(i, j):
            out.append((i, j, float(cand_len[e])))
            if len(out) == k - 1:
                break
    return out


def _complete_edges(pts: np.ndarray):
    k = pts.shape[0]
    ii, jj = np.triu_indices(k, k=1)
    d = np.hypot(pts[ii, 0] - pts[jj, 0], pts[ii, 1] - pts[jj, 1])
    return ii, jj, d


def emst(points) -> EdgeList:
    """Exact Euclidean minimum spanning tree.

    Small or degenerate inputs run Kruskal on the complete graph; larger
    inputs restrict candidates to Delaunay edges (which always contain an
    EMST), falling back to the complete graph if triangulation fails.
    """
    pts = np.asarray(points, dtype=np.float64)
    k = pts.shape[0]
    if k < 2:
        raise ParameterError("emst needs at least 2 points")
    if k == 2:
        l = float(np.hypot(*(pts[0] - pts[1])))
        return EdgeList(edges=[(0, 1, l)], total_length=l)
    if k <= 32:
        ii, jj, d = _complete_edges(pts)
    else:
        try:
            tri = Delaunay(pts)
            s = tri.simplices
            pairs = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
            pairs = np.unique(np.sort(pairs, axis=1), axis=0)
            ii, jj = pairs[:, 0], pairs[:, 1]
            d = np.hypot(pts[ii, 0] - pts[jj, 0], pts[ii, 1] - pts[jj, 1])
        except QhullError:
            ii, jj, d = _complete_edges(pts)
    edges = _kruskal(k, ii, jj, d)
    if len(edges) < k - 1:  # disconnected candidates cannot happen with Delaunay
        ii, jj, d = _complete_edges(pts)
        edges = _kruskal(k, ii, jj, d)
    return EdgeList(edges=edges, total_length=float(sum(e[2] for e in edges)))


def emst_length_statistic(d: Deployment, trials: int, set_size: int, seed: int) -> float:
    """Mean EMST length over ``trials`` uniform sets of ``set_size`` points
    drawn in the deployment region (estimates the EMST growth constant)."""
    if set_size < 2:
        raise ParameterError("set_size must be >= 2")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng([seed, 0x0E57])
    total = 0.0
    for _ in range(trials):
        pts = rng.random((set_size, 2)) * d.side
        total += emst(pts).total_length
    return total / trials


@dataclass
class SchemeLattice:
    """Square-cell lattice over the region at rotation 0 or pi/4.

    For theta = pi/4 the cells are diamonds indexed in rotated coordinates;
    rows * cols covers the region with partial boundary cells, and
    ``cell_of`` is total (out-of-range coordinates clip inward).
    """

    region_side: float
    cell_side: float
    theta: float
    rows: int
    cols: int
    _joff: int = 0

    def cell_of(self, pts: np.ndarray):
        """(row, col) per point; accepts an (k, 2) array."""
        pts = np.asarray(pts, dtype=np.float64)
        if self.theta == THETA_AXIS:
            col = np.clip((pts[:, 0] / self.cell_side).astype(np.int64), 0, self.cols - 1)
            row = np.clip((pts[:, 1] / self.cell_side).astype(np.int64), 0, self.rows - 1)
            return row, col
        a = self.cell_side * math.sqrt(2.0)
        i = np.floor((pts[:, 0] + pts[:, 1]) / a).astype(np.int64)
        j = np.floor((pts[:, 0] - pts[:, 1]) / a).astype(np.int64)
        col = np.clip(i, 0, self.cols - 1)
        row = np.clip(j + self._joff, 0, self.rows - 1)
        return row, col

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols


def make_lattice(region_side: float, cell_side: float, theta: float) -> SchemeLattice:
    """Construct a scheme lattice; only theta = 0 and theta = pi/4 exist."""
    if cell_side <= 0 or region_side <= 0:
        raise ParameterError("sides must be positive")
    if theta == THETA_AXIS:
        m = max(1, math.ceil(region_side / cell_side))
        return SchemeLattice(region_side, cell_side, theta, rows=m, cols=m)
    if abs(theta - THETA_DIAG) < 1e-12:
        a = cell_side * math.sqrt(2.0)
        half = max(1, math.ceil(region_side / a))
        return SchemeLattice(region_side, cell_side, THETA_DIAG,
                             rows=2 * half, cols=2 * half, _joff=half)
    raise ParameterError("theta must be 0 or pi/4")


def deployment_to_csv(d: Deployment, path) -> None:
    """Write '(index,x,y)' rows under a one-line parameter header."""
    with open(path, "w") as fh:
        fh.write(f"# n={d.n} lambda={float(d.lam)!r} seed={d.seed} "
                 f"side={float(d.side)!r} count={d.count}\n")
        fh.write("index,x,y\n")
        for i, (x, y) in enumerate(d.points):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")


def deployment_from_csv(path) -> Deployment:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ParameterError("missing parameter header line")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        fh.readline()  # column names
        pts = [tuple(map(float, line.strip().split(",")[1:3]))
               for line in fh if line.strip()]
    points = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    return Deployment(n=int(meta["n"]), lam=float(meta["lambda"]),
                      side=float(meta["side"]), points=points,
                      seed=int(meta["seed"]))
