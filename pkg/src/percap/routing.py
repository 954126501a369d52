"""Multicast sessions, constructible spanning trees, scheme routing, and
per-link load accounting.

Routes are stored as hop-index ranges over road station sequences (arterial
columns/rows, highway paths) plus individual access and junction hops, so a
session's tree costs O(tree edges) rather than O(physical hops). Merging
duplicate hops is interval union per road; cycle removal is a union-find
pass over sub-segments (dropping any element whose endpoints are already
connected keeps connectivity intact); dangling stubs are leaf-pruned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from percap import kernels
from percap.backbones import (ORDINARY, PARALLEL, ArterialSystem,
                              HighwaySystem)
from percap.errors import ConstructionError, ParameterError, StateError
from percap.spatial import Deployment, EdgeList, emst, nearest_nodes_bulk

_SALT_SESSIONS = 0x5E55

ACCESS, AR, HIGHWAY = "access", "ar", "highway"
_FAMILIES = ("arv", "arh", "hwh", "hwv")
_LAYER_OF_FAMILY = {"arv": AR, "arh": AR, "hwh": HIGHWAY, "hwv": HIGHWAY}


@dataclass
class MulticastSession:
    """One source, its candidate points, and the deduplicated destinations."""

    k: int
    source: int
    candidate_points: np.ndarray
    destinations: np.ndarray
    spanning_set: np.ndarray
    rate: float = math.nan


def generate_sessions(d: Deployment, n_s: int, n_d: int, seed: int) -> list:
    """Sample n_s sessions: uniform sources, n_d uniform candidate points
    each, destinations = nearest nodes (duplicates collapse)."""
    if not (1 <= n_d <= d.n - 1):
        raise ParameterError("n_d must lie in [1, n-1]")
    if not (1 < n_s <= d.n):
        raise ParameterError("n_s must lie in (1, n]")
    if d.count == 0:
        raise StateError("empty deployment")
    rng = np.random.default_rng([seed, _SALT_SESSIONS])
    sources = rng.integers(0, d.count, size=n_s)
    cand = rng.random((n_s, n_d, 2)) * d.side
    near = nearest_nodes_bulk(d, cand.reshape(-1, 2)).reshape(n_s, n_d)
    out = []
    for k in range(n_s):
        dests = np.unique(near[k])
        span = np.unique(np.concatenate(([sources[k]], dests)))
        out.append(MulticastSession(k=k, source=int(sources[k]),
                                    candidate_points=cand[k],
                                    destinations=dests, spanning_set=span))
    return out


def est(points, region_side: float) -> EdgeList:
    """Constructible spanning tree with total length <= 2 sqrt(2 k) * side.

    Points are chained in boustrophedon order over ceil(sqrt(k)) vertical
    strips, which meets the bound with margin; the bound is asserted on
    every instance, never assumed.
    """
    pts = np.asarray(points, dtype=np.float64)
    k = pts.shape[0]
    if k < 2:
        raise ParameterError("est needs at least 2 points")
    g = math.ceil(math.sqrt(k))
    width = region_side / g if region_side > 0 else 1.0
    col = np.minimum((pts[:, 0] / width).astype(np.int64), g - 1)
    signed_y = np.where(col % 2 == 0, pts[:, 1], -pts[:, 1])
    order = np.lexsort((signed_y, col))
    a, b = order[:-1], order[1:]
    lengths = np.hypot(pts[a, 0] - pts[b, 0], pts[a, 1] - pts[b, 1])
    total = float(lengths.sum())
    bound = 2.0 * math.sqrt(2.0) * math.sqrt(k) * region_side
    if total > bound + 1e-9:
        raise ConstructionError(f"EST length {total} exceeds bound {bound}")
    edges = [(int(i), int(j), float(l)) for i, j, l in zip(a, b, lengths)]
    return EdgeList(edges=edges, total_length=total)


@dataclass
class _Route:
    """Mutable per-session accumulator before merge/prune."""

    point_hops: dict = field(default_factory=dict)   # (a, b) -> layer
    road_ranges: dict = field(default_factory=dict)  # roadkey -> list[(lo, hi)]

    def add_point(self, layer: str, a: int, b: int):
        if a == b:
            return
        key = (min(a, b), max(a, b))
        self.point_hops.setdefault(key, layer)

    def add_range(self, roadkey, s0: int, s1: int):
        lo, hi = (s0, s1) if s0 <= s1 else (s1, s0)
        if lo == hi:
            return
        self.road_ranges.setdefault(roadkey, []).append((lo, hi))


@dataclass
class RoutingTree:
    """Merged, cycle-free physical realization of one session's tree.

    ``segments`` are (family, roadkey, station_lo, station_hi, node_lo,
    node_hi, flat_lo, flat_hi) covering hops [station_lo, station_hi);
    ``points`` are (layer, a, b) single hops.
    """

    session: int
    scheme: str
    segments: list
    points: list
    ar: ArterialSystem
    hs: Optional[HighwaySystem]

    def hops(self):
        """Yield (layer, tx, rx) for every physical hop (expanded)."""
        for layer, a, b in self.points:
            yield layer, a, b
        for family, roadkey, lo, hi, _, _, _, _ in self.segments:
            sts = _road_stations(self.ar, self.hs, family, roadkey)
            for p in range(lo, hi):
                yield _LAYER_OF_FAMILY[family], int(sts[p]), int(sts[p + 1])

    def nodes(self):
        seen = set()
        for _, a, b in self.hops():
            seen.add(a)
            seen.add(b)
        return seen


def _road_stations(ar: ArterialSystem, hs: Optional[HighwaySystem],
                   family: str, roadkey) -> np.ndarray:
    if family == "arv":
        j, t = roadkey
        return ar.stations[:, j] if ar.kind == ORDINARY else ar.stations[:, j, t]
    if family == "arh":
        i, t = roadkey
        return ar.stations[i, :] if ar.kind == ORDINARY else ar.stations[i, :, t]
    if family == "hwh":
        return hs.horizontal[roadkey].stations
    if family == "hwv":
        return hs.vertical[roadkey].stations
    raise ParameterError(f"unknown family {family}")


def _flat_base(ar: ArterialSystem, hs: Optional[HighwaySystem],
               family: str, roadkey) -> int:
    t_count = 1 if ar.kind == ORDINARY else ar.per_cell_stations
    if family == "arv":
        j, t = roadkey
        return (j * t_count + t) * (ar.rows - 1)
    if family == "arh":
        i, t = roadkey
        return (i * t_count + t) * (ar.cols - 1)
    if family == "hwh":
        return int(hs.hop_offsets_h[roadkey])
    return int(hs.hop_offsets_v[roadkey])


def family_sizes(ar: ArterialSystem, hs: Optional[HighwaySystem]) -> dict:
    t_count = 1 if ar.kind == ORDINARY else ar.per_cell_stations
    return {
        "arv": ar.cols * t_count * (ar.rows - 1),
        "arh": ar.rows * t_count * (ar.cols - 1),
        "hwh": int(hs.hop_offsets_h[-1]) if hs is not None else 0,
        "hwv": int(hs.hop_offsets_v[-1]) if hs is not None else 0,
    }


class _NodeUF:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent
        p.setdefault(x, x)
        while p[x] != x:
            p[x] = p.get(p[x], p[x])
            x = p[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


class _RoleIndex:
    """Where each station node sits on the road network.

    Needed to split session segments at every interior station that is
    shared with any other structure, so the per-session segment graph
    projects injectively onto physical nodes and cycle pruning is exact.
    """

    def __init__(self, ar: ArterialSystem, hs: Optional[HighwaySystem]):
        self.roles = {}
        t_count = 1 if ar.kind == ORDINARY else ar.per_cell_stations
        st = ar.stations.reshape(ar.rows, ar.cols, t_count)
        for i in range(ar.rows):
            for j in range(ar.cols):
                for t in range(t_count):
                    node = int(st[i, j, t])
                    self.roles.setdefault(node, []).append(("arv", (j, t), i))
                    self.roles.setdefault(node, []).append(("arh", (i, t), j))
        if hs is not None:
            for fam, group in (("hwh", hs.horizontal), ("hwv", hs.vertical)):
                for hid, hw in enumerate(group):
                    for pos, node in enumerate(hw.stations):
                        self.roles.setdefault(int(node), []).append((fam, hid, pos))
        # per road: sorted positions of stations that also appear in the
        # other layer (possible interior-interior coincidences)
        self.cross_layer = {}
        for node, rl in self.roles.items():
            fams = {r[0][:2] for r in rl}
            if "ar" in fams and "hw" in fams:
                for fam, key, pos in rl:
                    self.cross_layer.setdefault((fam, key), []).append(pos)
        for k in self.cross_layer:
            self.cross_layer[k] = sorted(self.cross_layer[k])
        self._hw_shared = {}
        self.hs = hs

    def hw_shared_positions(self, hh: int, vv: int):
        """Station positions shared by a horizontal and a vertical highway."""
        key = (hh, vv)
        hit = self._hw_shared.get(key)
        if hit is None:
            a = self.hs.horizontal[hh].stations
            b = self.hs.vertical[vv].stations
            _, ia, ib = np.intersect1d(a, b, return_indices=True)
            hit = (ia.tolist(), ib.tolist())
            self._hw_shared[key] = hit
        return hit


def _role_index(ar: ArterialSystem, hs: Optional[HighwaySystem]) -> _RoleIndex:
    cache = getattr(ar, "_role_index_cache", None)
    if cache is None:
        cache = {}
        ar._role_index_cache = cache
    key = id(hs)
    if key not in cache:
        cache[key] = _RoleIndex(ar, hs)
    return cache[key]


def _orient_edges(edge_list: EdgeList, root_local: int, k: int):
    """EST edges ordered and directed away from the root (BFS)."""
    adj = [[] for _ in range(k)]
    for i, j, _ in edge_list.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * k
    seen[root_local] = True
    queue = [root_local]
    out = []
    for u in queue:
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                out.append((u, v))
                queue.append(v)
    return out


def _route_edge(route: _Route, scheme: str, ar: ArterialSystem,
                hs: Optional[HighwaySystem], d: Deployment, u: int, v: int):
    i_u, j_u = int(ar.node_row[u]), int(ar.node_col[u])
    i_v, j_v = int(ar.node_row[v]), int(ar.node_col[v])
    parallel = ar.kind == PARALLEL
    if parallel:
        t_u, t_v = int(ar.node_pa[u]), int(ar.node_pa[v])
        drain_i = int(ar.drain_row[i_u])
        deliver_j = int(ar.deliver_col[j_v])
        vkey, hkey = (j_u, t_u), (i_v, t_v)
        s_u = int(ar.stations[drain_i, j_u, t_u])
        s_v = int(ar.stations[i_v, deliver_j, t_v])
        v_start = drain_i
        h_end = deliver_j
    else:
        t_u = t_v = 0
        vkey, hkey = (j_u, 0), (i_v, 0)
        s_u = int(ar.stations[i_u, j_u])
        s_v = int(ar.stations[i_v, j_v])
        v_start = i_u
        h_end = j_v
    route.add_point(ACCESS, u, s_u)
    route.add_point(ACCESS, s_v, v)

    if scheme in ("o", "p"):
        route.add_range(("arv", vkey), v_start, i_v)
        if parallel and t_u != t_v:
            a = int(ar.stations[i_v, j_u, t_u])
            b = int(ar.stations[i_v, j_u, t_v])
            route.add_point(AR, a, b)
        h_start = j_u
        route.add_range(("arh", hkey), h_start, h_end)
        return

    # schemes with highways
    hh = hs.horizontal_for(float(d.points[u, 1]))
    vv = hs.vertical_for(float(d.points[v, 0]))
    hw_h, hw_v = hs.horizontal[hh], hs.vertical[vv]
    col_x = (j_u + 0.5) * ar.cell_side
    entry = hw_h.nearest_station_index(col_x, axis=0)
    jh, jv = hs.junction(hh, vv)
    row_y = (i_v + 0.5) * ar.cell_side
    exit_ = hw_v.nearest_station_index(row_y, axis=1)

    entry_pos = hw_h.positions[entry]
    i_entry = min(max(int(entry_pos[1] / ar.cell_side), 0), ar.rows - 1)
    exit_pos = hw_v.positions[exit_]
    j_exit = min(max(int(exit_pos[0] / ar.cell_side), 0), ar.cols - 1)

    route.add_range(("arv", vkey), v_start, i_entry)
    if parallel:
        ar_entry_station = int(ar.stations[i_entry, j_u, t_u])
        ar_exit_station = int(ar.stations[i_v, j_exit, t_v])
    else:
        ar_entry_station = int(ar.stations[i_entry, j_u])
        ar_exit_station = int(ar.stations[i_v, j_exit])
    route.add_point(AR, ar_entry_station, int(hw_h.stations[entry]))
    route.add_range(("hwh", hh), entry, jh)
    route.add_point(HIGHWAY, int(hw_h.stations[jh]), int(hw_v.stations[jv]))
    route.add_range(("hwv", vv), jv, exit_)
    route.add_point(AR, int(hw_v.stations[exit_]), ar_exit_station)
    route.add_range(("arh", hkey), j_exit, h_end)


def route(session: MulticastSession, scheme: str,
          hs: Optional[HighwaySystem], ar: ArterialSystem,
          tree_kind: str = "est") -> RoutingTree:
    """Physical routing tree of a session under one of the four schemes.

    Scheme 'o'/'p' rides arterial roads Manhattan-style; 'o&h'/'p&h' rides
    the vertical road to the assigned horizontal highway, crosses highways,
    and descends the destination's horizontal road. Duplicate hops merge,
    cycles are removed, and connectivity from source to every destination
    is verified before returning.
    """
    if scheme not in ("o", "p", "o&h", "p&h"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    needs_parallel = scheme in ("p", "p&h")
    if needs_parallel != (ar.kind == PARALLEL):
        raise StateError(f"scheme {scheme} needs a "
                         f"{'parallel' if needs_parallel else 'ordinary'} AR system")
    if scheme.endswith("&h") and hs is None:
        raise StateError(f"scheme {scheme} needs a highway system")
    d = ar.deployment
    span = session.spanning_set
    rt = _Route()
    if span.size >= 2:
        pts = d.points[span]
        tree = emst(pts) if tree_kind == "emst" else est(pts, d.side)
        root_local = int(np.searchsorted(span, session.source))
        for a, b in _orient_edges(tree, root_local, span.size):
            _route_edge(rt, scheme, ar, hs, d, int(span[a]), int(span[b]))

    segments, points = _merge_and_prune(rt, ar, hs, session)
    return RoutingTree(session=session.k, scheme=scheme, segments=segments,
                       points=points, ar=ar, hs=hs)


def _merge_and_prune(rt: _Route, ar: ArterialSystem,
                     hs: Optional[HighwaySystem], session: MulticastSession):
    roles = _role_index(ar, hs)
    merged_by_road = {}
    cuts_by_road = {}
    for (family, roadkey), ranges in rt.road_ranges.items():
        merged = []
        for lo, hi in sorted(ranges):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        merged_by_road[(family, roadkey)] = merged
        cuts_by_road[(family, roadkey)] = {p for r in ranges for p in r}

    def add_cut(road, pos):
        if road in cuts_by_road:
            cuts_by_road[road].add(pos)

    # arterial column x row crossings share the cell station (same rank)
    arv_roads = [(k, m) for (f, k), m in merged_by_road.items() if f == "arv"]
    arh_roads = [(k, m) for (f, k), m in merged_by_road.items() if f == "arh"]
    for (j, t), vmerged in arv_roads:
        for (i, t2), hmerged in arh_roads:
            if t != t2:
                continue
            if any(lo <= i <= hi for lo, hi in vmerged) and \
               any(lo <= j <= hi for lo, hi in hmerged):
                add_cut(("arv", (j, t)), i)
                add_cut(("arh", (i, t2)), j)
    # crossing highways can share diamonds (hence stations)
    hwh_roads = [k for (f, k) in merged_by_road if f == "hwh"]
    hwv_roads = [k for (f, k) in merged_by_road if f == "hwv"]
    for hh in hwh_roads:
        for vv in hwv_roads:
            ph, pv = roles.hw_shared_positions(hh, vv)
            for p, q in zip(ph, pv):
                add_cut(("hwh", hh), p)
                add_cut(("hwv", vv), q)
    # cross-layer station coincidences (AR station == highway station)
    for road in merged_by_road:
        for pos in roles.cross_layer.get(road, ()):
            add_cut(road, pos)
    # element endpoints (access/junction ends, spanning nodes) that sit on a
    # road used by this session
    endpoint_nodes = {n for (a, b) in rt.point_hops for n in (a, b)}
    endpoint_nodes.update(int(x) for x in session.spanning_set)
    for node in endpoint_nodes:
        for fam, key, pos in roles.roles.get(node, ()):
            add_cut((fam, key), pos)

    uf = _NodeUF()
    kept_points = []
    for (a, b), layer in rt.point_hops.items():
        if uf.union(a, b):
            kept_points.append((layer, a, b))
    kept_segments = []
    for (family, roadkey), merged in merged_by_road.items():
        cuts = sorted(cuts_by_road[(family, roadkey)])
        sts = _road_stations(ar, hs, family, roadkey)
        base = _flat_base(ar, hs, family, roadkey)
        for lo, hi in merged:
            inner = [c for c in cuts if lo < c < hi]
            bounds = [lo] + inner + [hi]
            for p, q in zip(bounds[:-1], bounds[1:]):
                na, nb = int(sts[p]), int(sts[q])
                if uf.union(na, nb):
                    kept_segments.append((family, roadkey, p, q, na, nb,
                                          base + p, base + q))

    # leaf-prune stubs that serve neither the source nor a destination
    required = {int(session.source)} | {int(x) for x in session.destinations}
    degree = {}
    elems = ([("pt", i, a, b) for i, (_, a, b) in enumerate(kept_points)]
             + [("seg", i, s[4], s[5]) for i, s in enumerate(kept_segments)])
    for _, _, a, b in elems:
        degree[a] = degree.get(a, 0) + 1
        degree[b] = degree.get(b, 0) + 1
    alive = [True] * len(elems)
    changed = True
    while changed:
        changed = False
        for idx, (_, _, a, b) in enumerate(elems):
            if not alive[idx]:
                continue
            for end in (a, b):
                if degree[end] == 1 and end not in required:
                    alive[idx] = False
                    degree[a] -= 1
                    degree[b] -= 1
                    changed = True
                    break
    kept_points = [kept_points[e[1]] for j, e in enumerate(elems)
                   if alive[j] and e[0] == "pt"]
    kept_segments = [kept_segments[e[1]] for j, e in enumerate(elems)
                     if alive[j] and e[0] == "seg"]

    for dest in session.destinations:
        if uf.find(int(dest)) != uf.find(int(session.source)):
            raise ConstructionError(
                f"destination {dest} unreachable in session {session.k}")
    return kept_segments, kept_points


class CompactTrees:
    """Array form of many routing trees (hop ranges + point hops)."""

    def __init__(self, ar: ArterialSystem, hs: Optional[HighwaySystem]):
        self.ar = ar
        self.hs = hs
        self.sizes = family_sizes(ar, hs)
        self.seg = {f: ([], [], []) for f in _FAMILIES}  # starts, ends, session
        self.points = []  # (session, layer, a, b)
        self.n_sessions = 0
        self.session_ids = []

    @classmethod
    def from_trees(cls, trees: Iterable[RoutingTree]) -> "CompactTrees":
        self = None
        for t in trees:
            if self is None:
                self = cls(t.ar, t.hs)
            self.add(t)
        if self is None:
            raise ParameterError("no trees supplied")
        return self

    def add(self, t: RoutingTree):
        sid = self.n_sessions
        self.n_sessions += 1
        self.session_ids.append(t.session)
        for family, _, _, _, _, _, flo, fhi in t.segments:
            s, e, g = self.seg[family]
            s.append(flo)
            e.append(fhi)
            g.append(sid)
        for layer, a, b in t.points:
            self.points.append((sid, layer, a, b))


def load_map(trees) -> "LoadMap":
    """Per-physical-link session counts over all supplied trees."""
    compact = trees if isinstance(trees, CompactTrees) else CompactTrees.from_trees(trees)
    return LoadMap(compact)


class LoadMap:
    """Distinct-session counts per physical hop, by road family plus
    individual access/junction links."""

    def __init__(self, compact: CompactTrees):
        self.compact = compact
        self.family_loads = {}
        for f in _FAMILIES:
            size = compact.sizes[f]
            starts, ends, _ = compact.seg[f]
            diff = np.zeros(size + 1, dtype=np.int64)
            if starts:
                np.add.at(diff, np.asarray(starts), 1)
                np.add.at(diff, np.asarray(ends), -1)
            self.family_loads[f] = np.cumsum(diff[:-1]).astype(np.float64)
        self.point_loads = {}
        for _, _, a, b in compact.points:
            key = (a, b)
            self.point_loads[key] = self.point_loads.get(key, 0) + 1

    def link_load(self, a: int, b: int) -> int:
        """Count for a single access/junction link (unordered)."""
        return self.point_loads.get((min(a, b), max(a, b)), 0)

    def hop_load(self, family: str, flat_index: int) -> int:
        return int(self.family_loads[family][flat_index])

    @property
    def max_ar_load(self) -> int:
        m = max((arr.max() if arr.size else 0.0)
                for f, arr in self.family_loads.items() if f.startswith("ar"))
        return int(m)

    @property
    def max_highway_load(self) -> int:
        m = max((arr.max() if arr.size else 0.0)
                for f, arr in self.family_loads.items() if f.startswith("hw"))
        return int(m)

    @property
    def max_access_load(self) -> int:
        acc = [c for (a, b), c in self.point_loads.items()]
        return int(max(acc)) if acc else 0


@dataclass
class ThroughputReport:
    per_session: np.ndarray
    throughput: float
    bottleneck_layer: str
    bottleneck_session: int


def measure_throughput(trees, loads: LoadMap, rates: dict) -> ThroughputReport:
    """Static-load throughput: per-session rate = min over hops of
    (layer sustained rate / hop load); network throughput = min over
    sessions; the binding layer of the worst session is reported."""
    compact = trees if isinstance(trees, CompactTrees) else CompactTrees.from_trees(trees)
    ns = compact.n_sessions
    layer_max = {layer: np.zeros(ns) for layer in (ACCESS, AR, HIGHWAY)}
    for f in _FAMILIES:
        starts, ends, groups = compact.seg[f]
        if not starts:
            continue
        fam_max = kernels.range_max(loads.family_loads[f],
                                    np.asarray(starts, dtype=np.int64),
                                    np.asarray(ends, dtype=np.int64),
                                    np.asarray(groups, dtype=np.int64), ns)
        layer = _LAYER_OF_FAMILY[f]
        np.maximum(layer_max[layer], fam_max, out=layer_max[layer])
    for sid, layer, a, b in compact.points:
        c = loads.point_loads[(a, b)]
        if c > layer_max[layer][sid]:
            layer_max[layer][sid] = c
    per_session = np.full(ns, math.inf)
    binding = np.full(ns, -1, dtype=np.int64)
    layers = (ACCESS, AR, HIGHWAY)
    for li, layer in enumerate(layers):
        mask = layer_max[layer] > 0
        if not mask.any():
            continue
        cand = np.where(mask, rates[layer] / np.maximum(layer_max[layer], 1e-300),
                        math.inf)
        better = cand < per_session
        per_session = np.where(better, cand, per_session)
        binding = np.where(better, li, binding)
    active = np.isfinite(per_session)
    if not active.any():
        return ThroughputReport(per_session=per_session, throughput=math.inf,
                                bottleneck_layer="none", bottleneck_session=-1)
    worst = int(np.argmin(np.where(active, per_session, math.inf)))
    return ThroughputReport(
        per_session=per_session,
        throughput=float(per_session[worst]),
        bottleneck_layer=layers[int(binding[worst])],
        bottleneck_session=int(compact.session_ids[worst]),
    )


def dump_trees_csv(trees, path) -> None:
    """(session, scheme, layer, tx, rx) rows for every physical hop."""
    with open(path, "w") as fh:
        fh.write("session,scheme,layer,tx,rx\n")
        for t in trees:
            for layer, a, b in t.hops():
                fh.write(f"{t.session},{t.scheme},{layer},{a},{b}\n")
