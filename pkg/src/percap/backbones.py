"""Backbone construction: percolation highways, ordinary and parallel
arterial roads, and single-hop access paths.

Highway geometry follows the classic diamond construction: the region is
tiled by pi/4-rotated squares (side c/sqrt(lambda)) indexed on a bond grid
of spacing a = sqrt(2) c / sqrt(lambda); a diamond is open iff it contains a
node, and horizontal (vertical) highways are cell-disjoint open crossings of
the interleaved diamond grid, found per slab of ceil(kappa log m) rows.
Consecutive path cells share at least a corner, so station hops never exceed
2a = 2 sqrt(2) c / sqrt(lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from percap.channel import ChannelParams, TdmaSchedule
from percap.errors import ConstructionError, ParameterError, StateError
from percap.percolation import disjoint_crossing_paths
from percap.spatial import Deployment, SchemeLattice, THETA_DIAG, make_lattice

ORDINARY = "ordinary"
PARALLEL = "parallel"

_SALT_STATIONS = 0xA12
_SALT_RATES = 0xA13

DEFAULT_C = math.sqrt(2.0 * math.log(6.0))  # open prob 1 - 1/36


def default_kappa(p: float) -> int:
    """Smallest integer kappa with 2 + kappa * log(6 (1 - p)) < 0."""
    if not (5.0 / 6.0 < p <= 1.0):
        raise ParameterError("open probability must exceed 5/6")
    if 6.0 * (1.0 - p) < 1e-300:  # open probability saturated to 1
        return 1
    k = 1
    while 2.0 + k * math.log(6.0 * (1.0 - p)) >= 0.0:
        k += 1
    return k


def _diamond_indices(points: np.ndarray, a: float):
    """Map points to their diamond: (is_horizontal, k, l) per point.

    Diamonds of half-diagonal a/2 tile the plane; type-H diamonds sit on
    horizontal bond edges (centers ((k+1/2)a, la)), type-V on vertical ones
    (centers (ka, (l+1/2)a)).
    """
    p = np.floor((points[:, 0] + points[:, 1]) / a).astype(np.int64)
    q = np.floor((points[:, 0] - points[:, 1]) / a).astype(np.int64)
    even = (p + q) % 2 == 0
    k = np.where(even, (p + q) // 2, (p + q + 1) // 2)
    l = np.where(even, (p - q) // 2, (p - q - 1) // 2)
    return even, k, l


@dataclass
class Highway:
    """One crossing path: grid cells plus the chosen station per cell."""

    cells: list                 # (is_horizontal, k, l) per hop cell
    stations: np.ndarray        # node indices, one per cell
    positions: np.ndarray       # (len, 2) station coordinates
    slab: int
    _x_sorted: Optional[np.ndarray] = field(default=None, repr=False)
    _x_order: Optional[np.ndarray] = field(default=None, repr=False)
    _y_sorted: Optional[np.ndarray] = field(default=None, repr=False)
    _y_order: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.stations)

    def _axis(self, axis: int):
        if axis == 0:
            if self._x_order is None:
                self._x_order = np.argsort(self.positions[:, 0], kind="stable")
                self._x_sorted = self.positions[self._x_order, 0]
            return self._x_sorted, self._x_order
        if self._y_order is None:
            self._y_order = np.argsort(self.positions[:, 1], kind="stable")
            self._y_sorted = self.positions[self._y_order, 1]
        return self._y_sorted, self._y_order

    def nearest_station_index(self, coord: float, axis: int) -> int:
        """Path index of the station whose x (axis=0) or y (axis=1) is closest."""
        vals, order = self._axis(axis)
        j = int(np.searchsorted(vals, coord))
        best, bestd = -1, math.inf
        for cand in (j - 1, j):
            if 0 <= cand < len(vals):
                dd = abs(vals[cand] - coord)
                if dd < bestd:
                    bestd, best = dd, int(order[cand])
        return best


@dataclass
class HighwaySystem:
    """Highways plus the slab/slice bookkeeping used for assignment."""

    lattice: SchemeLattice
    c: float
    kappa: int
    p_open: float
    a: float                       # bond spacing = sqrt(2) * cell_side
    m: int
    horizontal: list
    vertical: list
    h_slabs: list                  # (row0, row1) ranges of the crossing grid
    v_slabs: list
    h_slab_roads: list             # highway ids per horizontal slab
    v_slab_roads: list
    slab_counts_h: list
    slab_counts_v: list
    eta_est: float
    complete: bool
    diagnostics: list
    hop_offsets_h: np.ndarray = field(default=None)
    hop_offsets_v: np.ndarray = field(default=None)
    _junctions: dict = field(default_factory=dict, repr=False)

    def _slab_slice(self, coord: float, slabs, slab_roads) -> int:
        row = min(max(int(coord / self.a), 0), self.m)
        for s, (r0, r1) in enumerate(slabs):
            if r0 <= row < r1:
                roads = slab_roads[s]
                if not roads:
                    raise StateError(f"slab {s} has no highways")
                band0, band1 = r0 * self.a, r1 * self.a
                width = (band1 - band0) / len(roads)
                j = min(int((coord - band0) / width) if width > 0 else 0,
                        len(roads) - 1)
                return roads[max(j, 0)]
        raise StateError("coordinate outside every slab")

    def horizontal_for(self, y: float) -> int:
        """Slice-assigned horizontal highway id for a node at height y."""
        return self._slab_slice(y, self.h_slabs, self.h_slab_roads)

    def vertical_for(self, x: float) -> int:
        return self._slab_slice(x, self.v_slabs, self.v_slab_roads)

    def slab_of(self, coord: float, direction: str = "horizontal") -> int:
        """Slab index holding a y (horizontal) or x (vertical) coordinate."""
        slabs = self.h_slabs if direction == "horizontal" else self.v_slabs
        row = min(max(int(coord / self.a), 0), self.m)
        for s, (r0, r1) in enumerate(slabs):
            if r0 <= row < r1:
                return s
        return len(slabs) - 1

    def junction(self, h_id: int, v_id: int):
        """(index on horizontal, index on vertical) of the closest station pair."""
        key = (h_id, v_id)
        hit = self._junctions.get(key)
        if hit is None:
            hw, vw = self.horizontal[h_id], self.vertical[v_id]
            vy, vorder = vw._axis(1)
            j = np.clip(np.searchsorted(vy, hw.positions[:, 1]), 0, len(vy) - 1)
            jm = np.clip(j - 1, 0, len(vy) - 1)
            cand = np.where(
                np.abs(vy[j] - hw.positions[:, 1]) <= np.abs(vy[jm] - hw.positions[:, 1]),
                j, jm)
            vidx = vorder[cand]
            d2 = ((hw.positions[:, 0] - vw.positions[vidx, 0]) ** 2
                  + (hw.positions[:, 1] - vw.positions[vidx, 1]) ** 2)
            i = int(np.argmin(d2))
            hit = (i, int(vidx[i]))
            self._junctions[key] = hit
        return hit


def build_highways(d: Deployment, c: float = DEFAULT_C,
                   kappa: Optional[int] = None) -> HighwaySystem:
    """Construct the highway system on the pi/4 percolation lattice.

    Requires the crossing hypothesis p = 1 - exp(-c^2) > 5/6 with
    2 + kappa log(6(1-p)) < 0. Slabs with zero crossings leave the system
    flagged incomplete (with diagnostics) rather than raising.
    """
    p = 1.0 - math.exp(-c * c)
    if kappa is None:
        kappa = default_kappa(p)
    if p <= 5.0 / 6.0:
        raise ParameterError(f"open probability {p:.4f} must exceed 5/6")
    q = 6.0 * (1.0 - p)
    if q >= 1e-300 and 2.0 + kappa * math.log(q) >= 0.0:
        raise ParameterError("kappa too small for the crossing hypothesis")
    b = c / math.sqrt(d.lam)
    a = math.sqrt(2.0) * b
    m = int(d.side // a)
    if m < 2:
        raise ParameterError("region too small for the highway lattice")
    lattice = make_lattice(d.side, b, THETA_DIAG)

    is_h, kk, ll = _diamond_indices(d.points, a)
    open_h = np.zeros((m + 1, m + 1), dtype=bool)
    open_v = np.zeros((m + 1, m + 1), dtype=bool)
    # lowest node index per open diamond becomes its station
    st_h = np.full((m + 1, m + 1), d.count, dtype=np.int64)
    st_v = np.full((m + 1, m + 1), d.count, dtype=np.int64)
    for arr_open, arr_st, mask in ((open_h, st_h, is_h), (open_v, st_v, ~is_h)):
        sel = mask & (kk >= 0) & (kk <= m) & (ll >= 0) & (ll <= m)
        if sel.any():
            arr_open[kk[sel], ll[sel]] = True
            np.minimum.at(arr_st, (kk[sel], ll[sel]),
                          np.flatnonzero(sel).astype(np.int64))

    # interleaved crossing grids: columns alternate V- and H-diamonds
    rows = m + 1
    gh = np.zeros((rows, 2 * m + 1), dtype=bool)
    gh[:, 0::2] = open_v[: m + 1, :rows].T
    gh[:, 1::2] = open_h[:m, :rows].T
    gv = np.zeros((rows, 2 * m + 1), dtype=bool)
    gv[:, 0::2] = open_h[:rows, : m + 1]
    gv[:, 1::2] = open_v[:rows, :m]

    def slabs_for(nrows: int, height: int):
        nslabs = max(1, nrows // height)
        out = []
        for s in range(nslabs):
            r1 = (s + 1) * height if s < nslabs - 1 else nrows
            out.append((s * height, r1))
        return out

    height = max(1, math.ceil(kappa * math.log(m)))
    h_slabs = slabs_for(rows, height)
    v_slabs = slabs_for(rows, height)

    def cell_of_grid(row: int, col: int, horizontal_grid: bool):
        if horizontal_grid:
            # gh[l, 2k] = V(k, l); gh[l, 2k+1] = H(k, l)
            k, l = col // 2, row
            return (col % 2 == 1, k, l)
        # gv[k, 2l] = H(k, l); gv[k, 2l+1] = V(k, l)
        k, l = row, col // 2
        return (col % 2 == 0, k, l)

    def extract(grid, slabs, horizontal_grid: bool):
        highways, slab_roads, counts = [], [], []
        for s, slab in enumerate(slabs):
            paths = disjoint_crossing_paths(grid, slab, "horizontal")
            ids = []
            for path in paths:
                cells = [cell_of_grid(r, cc, horizontal_grid) for r, cc in path]
                st = np.array([st_h[k, l] if h else st_v[k, l]
                               for h, k, l in cells], dtype=np.int64)
                ids.append(len(highways))
                highways.append(Highway(cells=cells, stations=st,
                                        positions=d.points[st], slab=s))
            slab_roads.append(ids)
            counts.append(len(ids))
        return highways, slab_roads, counts

    horizontal, h_slab_roads, counts_h = extract(gh, h_slabs, True)
    vertical, v_slab_roads, counts_v = extract(gv, v_slabs, False)

    diagnostics = []
    for name, counts in (("horizontal", counts_h), ("vertical", counts_v)):
        for s, cnt in enumerate(counts):
            if cnt == 0:
                diagnostics.append(f"{name} slab {s} has zero crossings")
    eta = min(counts_h + counts_v) / math.log(m) if m > 1 else 0.0

    def offsets(hws):
        lens = np.array([max(len(h) - 1, 0) for h in hws], dtype=np.int64)
        return np.concatenate(([0], np.cumsum(lens)))

    return HighwaySystem(
        lattice=lattice, c=float(c), kappa=int(kappa), p_open=float(p),
        a=a, m=m, horizontal=horizontal, vertical=vertical,
        h_slabs=h_slabs, v_slabs=v_slabs,
        h_slab_roads=h_slab_roads, v_slab_roads=v_slab_roads,
        slab_counts_h=counts_h, slab_counts_v=counts_v,
        eta_est=float(eta), complete=not diagnostics, diagnostics=diagnostics,
        hop_offsets_h=offsets(horizontal), hop_offsets_v=offsets(vertical),
    )


@dataclass
class ArterialSystem:
    """Ordinary (one station/cell) or parallel (2 log n stations/cell) roads.

    Roads are implicit in the station arrays: vertical road j chains the
    stations of column j upward; horizontal road i chains row i rightward.
    For the parallel kind road t of a row/column uses rank-t stations
    (sorted by node index), which keeps same-orientation roads disjoint.
    """

    kind: str
    lattice: SchemeLattice
    rows: int
    cols: int
    cell_side: float
    stations: np.ndarray          # ordinary: (R, C); parallel: (R, C, T)
    node_row: np.ndarray
    node_col: np.ndarray
    deployment: Deployment
    station_cell_side: float = 0.0
    per_cell_stations: int = 1
    node_pa: Optional[np.ndarray] = None     # parallel: strip index per node
    drain_row: Optional[np.ndarray] = None   # parallel: adjacent row per cell row
    deliver_col: Optional[np.ndarray] = None
    _cell_members: Optional[list] = field(default=None, repr=False)

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols

    def station_of(self, u: int):
        """Assigned station node for u: own-cell (ordinary) or the rank-t
        station of the column-adjacent cell (parallel draining side)."""
        i, j = int(self.node_row[u]), int(self.node_col[u])
        if self.kind == ORDINARY:
            return int(self.stations[i, j])
        t = int(self.node_pa[u])
        return int(self.stations[self.drain_row[i], j, t])

    def deliver_station_of(self, v: int):
        """Station that delivers to v (parallel: row-adjacent cell)."""
        i, j = int(self.node_row[v]), int(self.node_col[v])
        if self.kind == ORDINARY:
            return int(self.stations[i, j])
        t = int(self.node_pa[v])
        return int(self.stations[i, self.deliver_col[j], t])

    def cell_members(self, i: int, j: int) -> np.ndarray:
        if self._cell_members is None:
            cell = self.node_row * self.cols + self.node_col
            order = np.argsort(cell, kind="stable")
            counts = np.bincount(cell, minlength=self.num_cells)
            starts = np.concatenate(([0], np.cumsum(counts)))
            self._cell_members = (order, starts)
        order, starts = self._cell_members
        c = i * self.cols + j
        return order[starts[c]:starts[c + 1]]

    def station_positions(self) -> np.ndarray:
        return self.deployment.points[self.stations.reshape(-1)].reshape(
            self.stations.shape + (2,))


def build_arterial(d: Deployment, kind: str) -> ArterialSystem:
    """Build an arterial system on the axis lattice of cell side 3 sqrt(log n / lambda).

    Every AR-cell's node count must fall within [4.5 log n, 18 log n]; a
    violation raises ConstructionError naming the cell (the w.h.p. event
    failed and the caller retries or grows n). Station choices are seeded by
    the deployment seed, so reconstruction is deterministic.
    """
    if kind not in (ORDINARY, PARALLEL):
        raise ParameterError("kind must be 'ordinary' or 'parallel'")
    ln_n = math.log(d.n)
    if ln_n <= 0:
        raise ParameterError("n too small for an arterial lattice")
    b_nom = 3.0 * math.sqrt(ln_n / d.lam)
    cells = int(d.side // b_nom)
    if cells < 1:
        raise ConstructionError("region smaller than one AR-cell")
    cell_side = d.side / cells
    lattice = make_lattice(d.side, cell_side, 0.0)
    lattice.rows = lattice.cols = cells  # exact tiling, remainder absorbed

    col = np.minimum((d.points[:, 0] / cell_side).astype(np.int64), cells - 1)
    row = np.minimum((d.points[:, 1] / cell_side).astype(np.int64), cells - 1)
    counts = np.bincount(row * cells + col, minlength=cells * cells)
    lo, hi = 4.5 * ln_n, 18.0 * ln_n
    bad = np.flatnonzero((counts < lo) | (counts > hi))
    if bad.size:
        i, j = divmod(int(bad[0]), cells)
        raise ConstructionError(
            f"AR-cell ({i},{j}) holds {counts[bad[0]]} nodes, outside "
            f"[{lo:.1f}, {hi:.1f}]")

    rng = np.random.default_rng([d.seed, _SALT_STATIONS])
    cellid = row * cells + col
    order = np.argsort(cellid, kind="stable").astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    if kind == ORDINARY:
        st = np.empty((cells, cells), dtype=np.int64)
        for c in range(cells * cells):
            members = order[starts[c]:starts[c + 1]]
            st[c // cells, c % cells] = members[rng.integers(members.size)]
        return ArterialSystem(kind=kind, lattice=lattice, rows=cells,
                              cols=cells, cell_side=cell_side, stations=st,
                              node_row=row, node_col=col, deployment=d)

    t_count = math.ceil(2.0 * ln_n)
    sc_side = 2.0 * math.sqrt(ln_n / d.lam)
    st = np.empty((cells, cells, t_count), dtype=np.int64)
    half = sc_side / 2.0
    for c in range(cells * cells):
        i, j = divmod(c, cells)
        members = order[starts[c]:starts[c + 1]]
        cx = (j + 0.5) * cell_side
        cy = (i + 0.5) * cell_side
        px = d.points[members, 0]
        py = d.points[members, 1]
        inside = members[(np.abs(px - cx) <= half) & (np.abs(py - cy) <= half)]
        if inside.size < t_count:
            raise ConstructionError(
                f"station-cell ({i},{j}) holds {inside.size} nodes, "
                f"needs {t_count}")
        chosen = rng.choice(inside, size=t_count, replace=False)
        st[i, j, :] = np.sort(chosen)  # rank order by node index
    strip = cell_side / t_count
    pa = np.minimum(((d.points[:, 1] - row * cell_side) / strip).astype(np.int64),
                    t_count - 1)
    drain_row = np.arange(cells) + 1
    drain_row[-1] = cells - 2 if cells >= 2 else 0
    deliver_col = np.arange(cells) + 1
    deliver_col[-1] = cells - 2 if cells >= 2 else 0
    return ArterialSystem(kind=kind, lattice=lattice, rows=cells, cols=cells,
                          cell_side=cell_side, stations=st, node_row=row,
                          node_col=col, deployment=d,
                          station_cell_side=sc_side,
                          per_cell_stations=t_count, node_pa=pa,
                          drain_row=drain_row, deliver_col=deliver_col)


@dataclass
class AccessPathSet:
    """Single-hop draining/delivering links between nodes and stations."""

    kind: str
    ar: ArterialSystem
    params: ChannelParams
    rate_estimate: float
    _schedule: Optional[TdmaSchedule] = field(default=None, repr=False)

    def draining(self, u: int) -> tuple:
        return (u, self.ar.station_of(u))

    def delivering(self, v: int) -> tuple:
        return (self.ar.deliver_station_of(v), v)

    def path_rate(self, u: int) -> float:
        """Sustained draining rate for one node under the access TDMA."""
        return access_path_rate(self.ar, self.params, u)

    @property
    def schedule(self) -> TdmaSchedule:
        """Full access TDMA schedule (built lazily; large for big n)."""
        if self._schedule is None:
            self._schedule = _build_access_schedule(self.ar, self.params)
        return self._schedule


def _access_frame(ar: ArterialSystem) -> tuple:
    """(period, subslots) of the access TDMA frame for the system kind."""
    ln_n = math.log(ar.deployment.n)
    if ar.kind == ORDINARY:
        max_links = 2 * int(np.bincount(
            ar.node_row * ar.cols + ar.node_col,
            minlength=ar.num_cells).max())
        return 4, max(math.ceil(8.0 * ln_n), max_links)
    return 16 + 8, 1  # 2-TDMA interior + boundary 1-TDMA slot structure


def _build_access_schedule(ar: ArterialSystem, params: ChannelParams) -> TdmaSchedule:
    d = ar.deployment
    period, subslots = _access_frame(ar)
    assignment = {}
    per_cell_slot = {}
    structure = "4-TDMA x subslots" if ar.kind == ORDINARY else "2-TDMA+boundary (16+8)"
    for u in range(d.count):
        i, j = int(ar.node_row[u]), int(ar.node_col[u])
        slot = (i % 2) * 2 + (j % 2)
        drain = (u, ar.station_of(u))
        deliver = ar.deliver_station_of(u), u
        if drain[0] == drain[1]:
            continue  # station node: zero-hop access
        if ar.kind == ORDINARY:
            k = per_cell_slot.get((i, j), 0)
            assignment[drain] = (slot, k % subslots)
            assignment[deliver] = (slot, (k + 1) % subslots)
            per_cell_slot[(i, j)] = k + 2
        else:
            assignment[drain] = (slot % (period), 0)
            assignment[deliver] = ((slot + 2) % period, 0)
    return TdmaSchedule(period=period, subslots_per_slot=subslots,
                        positions=d.points, assignment=assignment,
                        structure=structure)


def build_access(d: Deployment, ar: ArterialSystem,
                 params: ChannelParams) -> AccessPathSet:
    """Wire every node's draining/delivering hop and estimate the access rate."""
    if ar.deployment is not d:
        raise StateError("arterial system belongs to a different deployment")
    rate = estimate_access_rate(ar, params)
    return AccessPathSet(kind=ar.kind, ar=ar, params=params,
                         rate_estimate=rate)


# --- rate estimation ---------------------------------------------------------

def _cell_center_grid(ar: ArterialSystem):
    ii, jj = np.meshgrid(np.arange(ar.rows), np.arange(ar.cols), indexing="ij")
    cx = (jj + 0.5) * ar.cell_side
    cy = (ii + 0.5) * ar.cell_side
    return ii, jj, cx, cy


def _pessimistic_cell_interference(params: ChannelParams, rx, centers,
                                   reach: float, per_cell: float) -> float:
    """Upper bound: each co-active cell transmits from its rx-nearest corner."""
    d = np.hypot(centers[:, 0] - rx[0], centers[:, 1] - rx[1]) - reach
    d = np.maximum(d, 1e-9)
    return float(per_cell * params.P * params.attenuation(d).sum())


def ar_hop_rate(ar: ArterialSystem, params: ChannelParams, i: int, j: int,
                vertical: bool, t: int = 0) -> float:
    """Sustained rate of one arterial hop under the layer's TDMA.

    Ordinary roads run 9-TDMA with the single cell station transmitting;
    parallel roads run 4-TDMA with all 2 log n stations of an active cell
    transmitting together (same-cell stations are exact interferers,
    co-active cells are bounded pessimistically by their nearest corner).
    """
    d = ar.deployment
    if vertical:
        i2, j2, t2 = i + 1, j, t
    else:
        i2, j2, t2 = i, j + 1, t
    if ar.kind == ORDINARY:
        tx = int(ar.stations[i, j])
        rx = int(ar.stations[i2, j2])
        period, reuse = 9, 3
    else:
        tx = int(ar.stations[i, j, t])
        rx = int(ar.stations[i2, j2, t2])
        period, reuse = 4, 2
    txp, rxp = d.points[tx], d.points[rx]
    dist = math.hypot(txp[0] - rxp[0], txp[1] - rxp[1])
    ii, jj, _, _ = _cell_center_grid(ar)
    co = (ii % reuse == i % reuse) & (jj % reuse == j % reuse)
    co[i, j] = False
    # stations are the only AR-phase transmitters: exact interferer set
    pos = d.points[ar.stations[co].reshape(-1)]
    dd = np.hypot(pos[:, 0] - rxp[0], pos[:, 1] - rxp[1])
    interference = float(params.P * params.attenuation(dd).sum())
    if ar.kind == PARALLEL:
        others = np.delete(np.arange(ar.per_cell_stations), t)
        pos = d.points[ar.stations[i, j, others]]
        dd = np.hypot(pos[:, 0] - rxp[0], pos[:, 1] - rxp[1])
        interference += float(params.P * params.attenuation(dd).sum())
    signal = params.P * float(params.attenuation(dist))
    rate = params.B * math.log2(1.0 + signal / (params.N0 + interference))
    return rate / period


def access_path_rate(ar: ArterialSystem, params: ChannelParams, u: int) -> float:
    """Sustained rate of node u's draining hop under the access TDMA."""
    d = ar.deployment
    i, j = int(ar.node_row[u]), int(ar.node_col[u])
    s = ar.station_of(u)
    if s == u:
        return math.inf  # zero-hop access
    rxp = d.points[s]
    txp = d.points[u]
    period, subslots = _access_frame(ar)
    reuse = 2
    ii, jj, cx, cy = _cell_center_grid(ar)
    co = (ii % reuse == i % reuse) & (jj % reuse == j % reuse)
    co[i, j] = False
    centers = np.column_stack([cx[co], cy[co]])
    reach = ar.cell_side * math.sqrt(2) / 2.0
    per_cell = 1.0 if ar.kind == ORDINARY else ar.per_cell_stations
    interference = _pessimistic_cell_interference(params, rxp, centers, reach,
                                                  per_cell)
    if ar.kind == PARALLEL:
        # one concurrent draining transmitter per other PA-strip of u's cell;
        # worst case puts each at its strip's rx-nearest node
        members = ar.cell_members(i, j)
        members = members[members != u]
        if members.size:
            pos = d.points[members]
            dd = np.hypot(pos[:, 0] - rxp[0], pos[:, 1] - rxp[1])
            strips = ar.node_pa[members]
            own = int(ar.node_pa[u])
            worst = [dd[strips == t2].min() for t2 in np.unique(strips)
                     if t2 != own and (strips == t2).any()]
            if worst:
                interference += float(
                    params.P * params.attenuation(np.array(worst)).sum())
    dist = math.hypot(txp[0] - rxp[0], txp[1] - rxp[1])
    signal = params.P * float(params.attenuation(dist))
    rate = params.B * math.log2(1.0 + signal / (params.N0 + interference))
    return rate / (period * subslots)


def estimate_access_rate(ar: ArterialSystem, params: ChannelParams,
                         sample: int = 48) -> float:
    """Minimum sustained access rate over a deterministic node sample."""
    d = ar.deployment
    rng = np.random.default_rng([d.seed, _SALT_RATES])
    nodes = rng.choice(d.count, size=min(sample, d.count), replace=False)
    rates = [access_path_rate(ar, params, int(u)) for u in nodes]
    finite = [r for r in rates if math.isfinite(r)]
    return min(finite) if finite else math.inf


def estimate_ar_rate(ar: ArterialSystem, params: ChannelParams,
                     sample: int = 48) -> float:
    """Minimum sustained arterial hop rate over a deterministic hop sample."""
    d = ar.deployment
    rng = np.random.default_rng([d.seed, _SALT_RATES + 1])
    rates = []
    for _ in range(sample):
        vertical = bool(rng.integers(2))
        i = int(rng.integers(ar.rows - 1 if vertical else ar.rows))
        j = int(rng.integers(ar.cols if vertical else ar.cols - 1))
        t = int(rng.integers(ar.per_cell_stations)) if ar.kind == PARALLEL else 0
        rates.append(ar_hop_rate(ar, params, i, j, vertical, t))
    return min(rates)


def highway_hop_rate(hs: HighwaySystem, d: Deployment, params: ChannelParams,
                     hw: Highway, hop: int, open_centers: np.ndarray) -> float:
    """Sustained rate of one highway hop under 9-TDMA on the diamond lattice."""
    tx = hw.positions[hop]
    rx = hw.positions[hop + 1]
    is_h, k, l = hw.cells[hop]
    # rotated diamond indices color the 9-TDMA frame
    big_i = k + l
    big_j = (k - l) if is_h else (k - l - 1)
    ii = open_centers[:, 2].astype(np.int64)
    jj = open_centers[:, 3].astype(np.int64)
    co = (ii % 3 == big_i % 3) & (jj % 3 == big_j % 3) \
        & ~((ii == big_i) & (jj == big_j))  # the tx diamond does not self-interfere
    centers = open_centers[co]
    dd = np.hypot(centers[:, 0] - rx[0], centers[:, 1] - rx[1])
    reach = hs.a / 2.0
    dd = np.maximum(dd - reach, 1e-9)
    interference = float(params.P * params.attenuation(dd).sum())
    dist = math.hypot(tx[0] - rx[0], tx[1] - rx[1])
    signal = params.P * float(params.attenuation(dist))
    rate = params.B * math.log2(1.0 + signal / (params.N0 + interference))
    return rate / 9.0


def open_diamond_centers(hs: HighwaySystem, d: Deployment) -> np.ndarray:
    """(x, y, I, J) rows for every open diamond, for interference bounds."""
    is_h, kk, ll = _diamond_indices(d.points, hs.a)
    rows = []
    seen = set()
    for h, k, l in zip(is_h, kk, ll):
        key = (bool(h), int(k), int(l))
        if key in seen:
            continue
        seen.add(key)
        if h:
            rows.append(((k + 0.5) * hs.a, l * hs.a, k + l, k - l))
        else:
            rows.append((k * hs.a, (l + 0.5) * hs.a, k + l, k - l - 1))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def estimate_highway_rate(hs: HighwaySystem, d: Deployment,
                          params: ChannelParams, sample: int = 48) -> float:
    """Minimum sustained highway hop rate over a deterministic sample."""
    all_h = [h for h in hs.horizontal + hs.vertical if len(h) >= 2]
    if not all_h:
        raise StateError("no highways with hops")
    centers = open_diamond_centers(hs, d)
    rng = np.random.default_rng([d.seed, _SALT_RATES + 2])
    rates = []
    for _ in range(sample):
        hw = all_h[int(rng.integers(len(all_h)))]
        hop = int(rng.integers(len(hw) - 1))
        rates.append(highway_hop_rate(hs, d, params, hw, hop, centers))
    return min(rates)


# --- backbone assignment -----------------------------------------------------

@dataclass(frozen=True)
class BackboneAssignment:
    """Deterministic backbone choice for a directed pair (u, v)."""

    ar_vertical_u: tuple      # ('v', col[, rank]) road key for u's column
    highway_h_u: int          # horizontal highway id for u's slice
    highway_v_v: int          # vertical highway id for v's slice
    ar_horizontal_v: tuple    # ('h', row[, rank]) road key for v's row


def assign_backbones(hs: Optional[HighwaySystem], ar: ArterialSystem,
                     u: int, v: int) -> BackboneAssignment:
    """Roads and highways a u->v link is mapped to (lookup only)."""
    d = ar.deployment
    ju = int(ar.node_col[u])
    iv = int(ar.node_row[v])
    if ar.kind == ORDINARY:
        ar_v = ("v", ju)
        ar_h = ("h", iv)
    else:
        ar_v = ("v", ju, int(ar.node_pa[u]))
        ar_h = ("h", iv, int(ar.node_pa[v]))
    hh = hs.horizontal_for(float(d.points[u, 1])) if hs is not None else -1
    vv = hs.vertical_for(float(d.points[v, 0])) if hs is not None else -1
    return BackboneAssignment(ar_vertical_u=ar_v, highway_h_u=hh,
                              highway_v_v=vv, ar_horizontal_v=ar_h)


def dump_backbones_csv(hs: Optional[HighwaySystem], ar: Optional[ArterialSystem],
                       path) -> None:
    """(system, road_id, hop_index, station_node_index) rows for all backbones."""
    with open(path, "w") as fh:
        fh.write("system,road_id,hop_index,station_node_index\n")
        if hs is not None:
            for name, group in (("highway_h", hs.horizontal),
                                ("highway_v", hs.vertical)):
                for rid, hw in enumerate(group):
                    for idx, st in enumerate(hw.stations):
                        fh.write(f"{name},{rid},{idx},{st}\n")
        if ar is not None:
            if ar.kind == ORDINARY:
                for j in range(ar.cols):
                    for i in range(ar.rows):
                        fh.write(f"ar_v,{j},{i},{ar.stations[i, j]}\n")
                for i in range(ar.rows):
                    for j in range(ar.cols):
                        fh.write(f"ar_h,{i},{j},{ar.stations[i, j]}\n")
            else:
                for j in range(ar.cols):
                    for t in range(ar.per_cell_stations):
                        for i in range(ar.rows):
                            fh.write(f"par_v,{j}:{t},{i},{ar.stations[i, j, t]}\n")
                for i in range(ar.rows):
                    for t in range(ar.per_cell_stations):
                        for j in range(ar.cols):
                            fh.write(f"par_h,{i}:{t},{j},{ar.stations[i, j, t]}\n")


def dump_assignments_csv(hs: Optional[HighwaySystem], ar: ArterialSystem,
                         path) -> None:
    """(node, ar_station, slice, highway_id) rows for every node."""
    d = ar.deployment
    with open(path, "w") as fh:
        fh.write("node,ar_station,slice,highway_id\n")
        for u in range(d.count):
            st = ar.station_of(u)
            if hs is not None:
                hid = hs.horizontal_for(float(d.points[u, 1]))
                sl = hs.horizontal[hid].slab
            else:
                hid, sl = -1, -1
            fh.write(f"{u},{st},{sl},{hid}\n")
