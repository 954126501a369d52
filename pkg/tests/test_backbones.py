import math

import numpy as np
import pytest

from percap.backbones import (ORDINARY, PARALLEL, access_path_rate,
                              ar_hop_rate, assign_backbones, build_access,
                              build_arterial, build_highways, default_kappa,
                              dump_assignments_csv, dump_backbones_csv,
                              estimate_highway_rate, DEFAULT_C)
from percap.channel import ChannelParams
from percap.errors import ConstructionError, ParameterError
from percap.spatial import Deployment, sample_deployment

EXT3 = ChannelParams(alpha=3.0, attenuation_mode="extended")
DENSE3 = ChannelParams(alpha=3.0, attenuation_mode="dense")


def median_access_rate(ar, params, sample=512, seed=0):
    rng = np.random.default_rng(seed)
    nodes = rng.choice(ar.deployment.count, size=sample, replace=False)
    rates = [access_path_rate(ar, params, int(u)) for u in nodes]
    return float(np.median([r for r in rates if math.isfinite(r)]))


def median_ar_rate(ar, params, sample=200, seed=0):
    rng = np.random.default_rng(seed)
    rates = []
    for _ in range(sample):
        vertical = bool(rng.integers(2))
        i = int(rng.integers(ar.rows - 1 if vertical else ar.rows))
        j = int(rng.integers(ar.cols if vertical else ar.cols - 1))
        t = int(rng.integers(ar.per_cell_stations)) if ar.kind == PARALLEL else 0
        rates.append(ar_hop_rate(ar, params, i, j, vertical, t))
    return float(np.median(rates))


# --- highways -------------------------------------------------------------------

def test_highway_hypothesis_validation():
    d = sample_deployment(2 ** 12, 1.0, seed=0)
    with pytest.raises(ParameterError):
        build_highways(d, c=1.0)          # p = 1 - 1/e < 5/6
    with pytest.raises(ParameterError):
        build_highways(d, c=DEFAULT_C, kappa=1)  # 2 + log(6/36) > 0
    with pytest.raises(ParameterError):
        default_kappa(0.5)


def test_highway_fully_open_grid():
    # cells of area 10 log n / lambda are all occupied w.h.p., so every slab
    # yields at least slab-height straight crossings
    n = 2 ** 12
    d = sample_deployment(n, 1.0, seed=3)
    c = math.sqrt(10 * math.log(n))
    hs = build_highways(d, c=c)
    assert hs.complete
    for slab, cnt in zip(hs.h_slabs, hs.slab_counts_h):
        assert cnt >= slab[1] - slab[0]


def test_highway_all_slabs_cross_at_default_parameters():
    for seed in range(5):
        d = sample_deployment(2 ** 14, 1.0, seed)
        hs = build_highways(d)
        assert hs.complete and not hs.diagnostics
        assert min(hs.slab_counts_h + hs.slab_counts_v) >= 1
        assert hs.eta_est > 0


def test_highway_station_hops_bounded():
    d = sample_deployment(2 ** 14, 1.0, seed=7)
    hs = build_highways(d)
    bound = 2 * math.sqrt(2) * hs.c / math.sqrt(d.lam)
    for hw in hs.horizontal + hs.vertical:
        if len(hw) >= 2:
            hops = np.hypot(np.diff(hw.positions[:, 0]),
                            np.diff(hw.positions[:, 1]))
            assert hops.max() <= bound + 1e-9


def test_highways_disjoint_within_slab_and_span_region():
    d = sample_deployment(2 ** 14, 1.0, seed=2)
    hs = build_highways(d)
    for slabs, group in ((hs.h_slab_roads, hs.horizontal),
                         (hs.v_slab_roads, hs.vertical)):
        for ids in slabs:
            seen = set()
            for hid in ids:
                cells = set(group[hid].cells)
                assert not (cells & seen)
                seen |= cells
    for hw in hs.horizontal:
        xs = hw.positions[:, 0]
        assert xs.min() <= hs.a and xs.max() >= hs.m * hs.a - hs.a


def test_highway_determinism():
    d = sample_deployment(2 ** 13, 1.0, seed=5)
    a, b = build_highways(d), build_highways(d)
    assert len(a.horizontal) == len(b.horizontal)
    for x, y in zip(a.horizontal, b.horizontal):
        assert np.array_equal(x.stations, y.stations)


def test_highway_slice_assignment_total_and_bijective():
    d = sample_deployment(2 ** 14, 1.0, seed=4)
    hs = build_highways(d)
    rng = np.random.default_rng(0)
    for y in rng.random(200) * d.side:
        hid = hs.horizontal_for(float(y))
        assert 0 <= hid < len(hs.horizontal)
    for ids in hs.h_slab_roads:
        assert len(ids) == len(set(ids))  # one distinct highway per slice


# --- arterial systems --------------------------------------------------------------

def test_ordinary_ar_structure():
    d = sample_deployment(2 ** 14, 1.0, seed=1)
    ar = build_arterial(d, ORDINARY)
    assert ar.stations.shape == (ar.rows, ar.cols)
    # every station is inside its own cell
    for i in range(ar.rows):
        for j in range(ar.cols):
            st = int(ar.stations[i, j])
            assert int(ar.node_row[st]) == i and int(ar.node_col[st]) == j
    # number of horizontal roads equals the number of rows by construction
    assert ar.rows == int(d.side // (3 * math.sqrt(math.log(d.n) / d.lam)))


def test_ar_cell_band_violation_names_cell():
    # a deployment with a manually emptied cell fails the count band
    base = sample_deployment(2 ** 12, 1.0, seed=0)
    b = 3 * math.sqrt(math.log(base.n) / base.lam)
    keep = ~((base.points[:, 0] < b) & (base.points[:, 1] < b))
    d = Deployment(n=base.n, lam=base.lam, side=base.side,
                   points=base.points[keep], seed=0)
    with pytest.raises(ConstructionError, match=r"AR-cell \(0,0\)"):
        build_arterial(d, ORDINARY)


def test_parallel_ar_structure():
    d = sample_deployment(2 ** 14, 1.0, seed=1)
    ar = build_arterial(d, PARALLEL)
    t = ar.per_cell_stations
    assert t == math.ceil(2 * math.log(d.n))
    assert ar.stations.shape == (ar.rows, ar.cols, t)
    half = ar.station_cell_side / 2
    for i in range(ar.rows):
        for j in range(ar.cols):
            sts = ar.stations[i, j]
            assert len(set(sts.tolist())) == t
            assert (np.diff(sts) > 0).all()  # rank order by node index
            cx, cy = (j + 0.5) * ar.cell_side, (i + 0.5) * ar.cell_side
            pos = d.points[sts]
            assert (np.abs(pos[:, 0] - cx) <= half + 1e-9).all()
            assert (np.abs(pos[:, 1] - cy) <= half + 1e-9).all()


def test_parallel_roads_station_disjoint_within_orientation():
    d = sample_deployment(2 ** 13, 1.0, seed=2)
    ar = build_arterial(d, PARALLEL)
    for i in range(ar.rows):  # horizontal roads of row i: ranks are disjoint
        flat = ar.stations[i].reshape(-1)
        assert len(set(flat.tolist())) == flat.size
    for j in range(ar.cols):
        flat = ar.stations[:, j].reshape(-1)
        assert len(set(flat.tolist())) == flat.size


def test_station_cell_population_at_2e14():
    # Station-cells (mean 4 log n nodes) must hold ceil(2 log n); the per-seed
    # failure probability at n = 2^14 is ~6% by the Poisson lower tail, so
    # 20/20 is not attainable. Measured: 19/20 with these seeds.
    ok = 0
    for seed in range(20):
        d = sample_deployment(2 ** 14, 1.0, seed)
        try:
            build_arterial(d, PARALLEL)
            ok += 1
        except ConstructionError:
            pass
    assert ok >= 17


def test_ar_hop_lengths_bounded():
    d = sample_deployment(2 ** 13, 1.0, seed=3)
    for kind in (ORDINARY, PARALLEL):
        ar = build_arterial(d, kind)
        bound = 2 * math.sqrt(2) * ar.cell_side + 1e-9
        st = ar.stations if kind == PARALLEL else ar.stations[..., None]
        pos = d.points[st.reshape(-1)].reshape(st.shape + (2,))
        dv = np.hypot(np.diff(pos[..., 0], axis=0), np.diff(pos[..., 1], axis=0))
        dh = np.hypot(np.diff(pos[..., 0], axis=1), np.diff(pos[..., 1], axis=1))
        assert dv.max() <= bound and dh.max() <= bound


def test_arterial_determinism():
    d = sample_deployment(2 ** 13, 1.0, seed=9)
    assert np.array_equal(build_arterial(d, ORDINARY).stations,
                          build_arterial(d, ORDINARY).stations)
    assert np.array_equal(build_arterial(d, PARALLEL).stations,
                          build_arterial(d, PARALLEL).stations)


# --- access paths ---------------------------------------------------------------------

def test_access_zero_hop_for_stations():
    d = sample_deployment(2 ** 12, 1.0, seed=0)
    ar = build_arterial(d, ORDINARY)
    acc = build_access(d, ar, EXT3)
    st = int(ar.stations[0, 0])
    u, s = acc.draining(st)
    assert u == s == st
    assert access_path_rate(ar, EXT3, st) == math.inf


def test_access_hops_within_cell_pair_diagonal():
    d = sample_deployment(2 ** 12, 1.0, seed=1)
    for kind, span in ((ORDINARY, math.sqrt(2.0)), (PARALLEL, math.sqrt(5.0))):
        ar = build_arterial(d, kind)
        acc = build_access(d, ar, EXT3)
        bound = span * ar.cell_side + 1e-9
        for u in range(0, d.count, 7):
            a, b = acc.draining(u)
            assert math.hypot(*(d.points[a] - d.points[b])) <= bound
            a, b = acc.delivering(u)
            assert math.hypot(*(d.points[a] - d.points[b])) <= bound


def test_access_schedule_structure():
    d = sample_deployment(2 ** 10, 1.0, seed=2)
    ar = build_arterial(d, ORDINARY)
    acc = build_access(d, ar, EXT3)
    sched = acc.schedule
    assert sched.period == 4
    assert sched.subslots_per_slot >= math.ceil(8 * math.log(d.n))
    # every non-station node has exactly its draining and delivering hop
    links = set(sched.assignment)
    stations = set(int(s) for s in ar.stations.reshape(-1))
    for u in range(d.count):
        if u in stations:
            continue
        assert acc.draining(u) in links and acc.delivering(u) in links
    arp = build_arterial(d, PARALLEL)
    accp = build_access(d, arp, EXT3)
    assert accp.schedule.period == 24  # 2-TDMA (16) + boundary 1-TDMA (8)
    assert accp.schedule.subslots_per_slot == 1


def test_parallel_access_station_serves_one_pa_cell():
    d = sample_deployment(2 ** 13, 1.0, seed=4)
    ar = build_arterial(d, PARALLEL)
    # draining targets: station rank == node's PA strip, adjacent cell in column
    per_station = {}
    for u in range(d.count):
        s = ar.station_of(u)
        per_station.setdefault(s, []).append(int(ar.node_pa[u]))
        i = int(ar.node_row[u])
        assert int(ar.node_row[s]) == int(ar.drain_row[i])
    for s, ranks in per_station.items():
        assert len(set(ranks)) == 1
    # PA-cell occupancy (area 9/(2 lambda)) stays bounded: mean 4.5 nodes
    sizes = [len(v) for v in per_station.values()]
    assert max(sizes) <= 30  # fitted bound, ~4x the Poisson mean tail at this n


# --- rates ------------------------------------------------------------------------------

def test_oar_rate_tracks_extended_form():
    # lambda = 1: sustained O-AR rate tracks (log n)^(-alpha/2) within x2
    ratios = []
    for e in (12, 14, 16, 18):
        d = sample_deployment(2 ** e, 1.0, seed=1)
        ar = build_arterial(d, ORDINARY)
        ratios.append(median_ar_rate(ar, EXT3) * math.log(2 ** e) ** 1.5)
    assert max(ratios) / min(ratios) <= 2.0


def test_oar_rate_theta_one_at_high_density():
    vals = []
    for e in (12, 14, 16):
        n = 2 ** e
        d = sample_deployment(n, float(n), seed=1)
        ar = build_arterial(d, ORDINARY)
        vals.append(median_ar_rate(ar, DENSE3))
    assert min(vals) > 0.01            # bounded away from zero, fitted floor
    assert max(vals) / min(vals) <= 2.0


def test_par_rate_tracks_one_over_log_band():
    # lambda = 4 >= (log n)^(1 - 2/alpha): per-road rate tracks 1/log n
    ratios = []
    for e in (12, 14, 16, 18):
        d = sample_deployment(2 ** e, 4.0, seed=1)
        ar = build_arterial(d, PARALLEL)
        ratios.append(median_ar_rate(ar, EXT3) * math.log(2 ** e))
    assert max(ratios) / min(ratios) <= 2.0


def test_par_rate_low_density_branch():
    ratios = []
    for e in (12, 14, 16):
        d = sample_deployment(2 ** e, 1.0, seed=1)
        ar = build_arterial(d, PARALLEL)
        ratios.append(median_ar_rate(ar, EXT3) * math.log(2 ** e) ** 1.5)
    assert max(ratios) / min(ratios) <= 2.0


def test_access_rate_tracks_oar_form():
    # ordinary access rates track R_O-AR within a x2 band across n
    ratios = []
    for e in (12, 14, 16, 18):
        d = sample_deployment(2 ** e, 1.0, seed=1)
        ar = build_arterial(d, ORDINARY)
        ratios.append(median_access_rate(ar, EXT3) * math.log(2 ** e) ** 1.5)
    assert max(ratios) / min(ratios) <= 2.0


def test_highway_rate_positive_and_stable():
    vals = []
    for e in (12, 14, 16):
        n = 2 ** e
        d = sample_deployment(n, float(n), seed=1)
        hs = build_highways(d)
        vals.append(estimate_highway_rate(hs, d, DENSE3))
    assert min(vals) > 0
    assert max(vals) / min(vals) <= 2.0


# --- assignment --------------------------------------------------------------------------

def test_assign_backbones_same_cell_and_determinism():
    d = sample_deployment(2 ** 13, 1.0, seed=6)
    hs = build_highways(d)
    ar = build_arterial(d, ORDINARY)
    cell = ar.node_row.astype(int) * ar.cols + ar.node_col.astype(int)
    same = np.flatnonzero(cell == cell[0])
    u, v = int(same[0]), int(same[1])
    a = assign_backbones(hs, ar, u, v)
    b = assign_backbones(hs, ar, v, u)
    assert a.ar_vertical_u == b.ar_vertical_u       # same column
    assert a.ar_horizontal_v == b.ar_horizontal_v   # same row
    assert a == assign_backbones(hs, ar, u, v)      # deterministic lookup


def test_dump_csvs(tmp_path):
    d = sample_deployment(2 ** 10, 1.0, seed=0)
    hs = build_highways(d)
    ar = build_arterial(d, ORDINARY)
    p1 = tmp_path / "bb.csv"
    p2 = tmp_path / "assign.csv"
    dump_backbones_csv(hs, ar, p1)
    dump_assignments_csv(hs, ar, p2)
    head = p1.read_text().splitlines()
    assert head[0] == "system,road_id,hop_index,station_node_index"
    assert len(head) > 10
    lines = p2.read_text().splitlines()
    assert lines[0] == "node,ar_station,slice,highway_id"
    assert len(lines) == d.count + 1
