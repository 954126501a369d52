"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. Criteria are checked at
their stated tolerances; the heavy Monte Carlo criteria reuse fixed seed
lists so results are reproducible run to run.
"""

import math
import time

import numpy as np
import pytest

from percap.bounds import (occupancy_L, occupancy_simulate, rdn_reference,
                           ren_reference, tightness, upper_bound)
from percap.harness import parse_config, run
from percap.percolation import cluster, exterior_stats
from percap.routing import est
from percap.spatial import emst, sample_deployment
from percap.backbones import build_highways

LN = math.log


def report(num, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def test_criterion_1_est_bound():
    t0 = time.time()
    rng = np.random.default_rng(101)
    side = 11.0
    violations = 0
    worst = 0.0
    for nd in (4, 16, 64):
        bound = 2 * math.sqrt(2) * math.sqrt(nd + 1) * side
        for _ in range(1000):
            pts = rng.random((nd + 1, 2)) * side
            total = est(pts, side).total_length
            worst = max(worst, total / bound)
            violations += total > bound
    report(1, violations == 0,
           f"EST bound violations {violations}/3000, worst length/bound "
           f"{worst:.3f} ({time.time() - t0:.1f}s)")


def _prim_oracle(pts):
    k = len(pts)
    in_tree = np.zeros(k, bool)
    in_tree[0] = True
    best = np.hypot(pts[:, 0] - pts[0, 0], pts[:, 1] - pts[0, 1])
    total = 0.0
    for _ in range(k - 1):
        cand = np.where(in_tree, np.inf, best)
        j = int(np.argmin(cand))
        total += float(cand[j])
        in_tree[j] = True
        d = np.hypot(pts[:, 0] - pts[j, 0], pts[:, 1] - pts[j, 1])
        best = np.minimum(best, d)
    return total


def test_criterion_2_emst_oracle_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(202)
    mismatches = 0
    for _ in range(500):
        k = int(rng.integers(2, 201))
        pts = rng.random((k, 2)) * float(rng.integers(1, 50))
        if abs(emst(pts).total_length - _prim_oracle(pts)) > 1e-8:
            mismatches += 1
    report(2, mismatches == 0,
           f"EMST equals Prim-over-complete-graph on 500 instances "
           f"(k <= 200), {mismatches} mismatches ({time.time() - t0:.1f}s)")


def test_criterion_3_percolation_phases():
    t0 = time.time()
    n = 10_000
    sub_ok = sup_ok = 0
    for seed in range(20):
        d = sample_deployment(n, 1.0, seed)
        sub = cluster(d, math.sqrt(0.5))  # gamma = 0.5 pi
        sup = cluster(d, 2.0)             # gamma = 4 pi
        sub_ok += sub.largest_size <= 8 * LN(n)
        sup_ok += sup.largest_size >= 0.5 * n
    report(3, sub_ok >= 19 and sup_ok >= 19,
           f"subcritical <= 8 log n in {sub_ok}/20 seeds, giant >= n/2 in "
           f"{sup_ok}/20 seeds ({time.time() - t0:.1f}s)")


def test_criterion_4_exterior_distance_statistic():
    t0 = time.time()
    means = []
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        vals = []
        for seed in range(20):
            d = sample_deployment(n, 1.0, seed)
            cl = cluster(d, 2.0)  # gamma = 4 pi
            vals.append(exterior_stats(d, cl).scaled_max)
        means.append((n, float(np.mean(vals))))
    x = np.log([m[0] for m in means])
    y = np.array([m[1] for m in means])
    slope = float(np.polyfit(x, y, 1)[0])
    report(4, abs(slope) <= 0.1,
           f"scaled exterior statistic means {[round(m[1], 3) for m in means]} "
           f"slope vs log n {slope:+.3f} (tolerance +/-0.1) "
           f"({time.time() - t0:.1f}s)")


def test_criterion_5_occupancy_formula():
    t0 = time.time()
    worst = 1.0
    rows = []
    points = []
    for n in (10 ** 3, 10 ** 4):
        points += [(max(2, int(math.sqrt(n))), n),
                   (int(0.3 * n / LN(n)), n),       # first branch
                   (n, n), (3 * n, n)]              # middle branch
    points.append((int(20 * 1000 * LN(1000)), 1000))  # third branch
    assert len(points) == 9
    for m, n in points:
        sim = float(occupancy_simulate(m, n, trials=300, seed=m).mean())
        form = occupancy_L(m, n)
        ratio = sim / form
        worst = max(worst, ratio, 1.0 / ratio)
        rows.append(round(ratio, 2))
    report(5, worst <= 2.0,
           f"max-load mean/formula ratios {rows} at 9 (m,n) points, worst "
           f"x{worst:.2f} (tolerance x2) ({time.time() - t0:.1f}s)")


def test_criterion_6_highway_density():
    t0 = time.time()
    c2 = 2.0 * LN(6.0)
    floors = {}
    for m in (64, 128, 256):
        n = int(2 * c2 * m * m)
        etas = []
        for seed in range(20):
            d = sample_deployment(n, 1.0, seed)
            hs = build_highways(d)
            etas.append(min(hs.slab_counts_h + hs.slab_counts_v) / LN(hs.m))
        floors[m] = min(etas)
    vals = list(floors.values())
    stable = max(vals) / min(vals) <= 2.0 if min(vals) > 0 else False
    report(6, min(vals) > 0 and stable,
           f"per-slab crossing floors eta(m) = "
           f"{ {m: round(v, 2) for m, v in floors.items()} }, "
           f"stability x{max(vals) / max(min(vals), 1e-9):.2f} (tolerance x2) "
           f"({time.time() - t0:.1f}s)")


def _ratio_slope(ratios, ns):
    return float(np.polyfit(np.log(ns), np.log(ratios), 1)[0])


def test_criterion_7_bound_tightness():
    t0 = time.time()
    ns = [2 ** 16, 2 ** 20, 2 ** 24]
    ok = True
    details = []
    # (a) the formerly open RDN gap
    ratios = [tightness(float(n), n, float(n), n / LN(n) ** 2.5, 3.0).ratio
              for n in ns]
    sa = _ratio_slope(ratios, ns)
    ok &= max(ratios) <= 8 and abs(sa) <= 0.05
    details.append(f"RDN gap ratios {[round(r, 2) for r in ratios]} "
                   f"slope {sa:+.3f}")
    # (b) the REN gap at alpha = 3
    ratios = [tightness(1.0, n, float(n), n / LN(n) ** 2.5, 3.0).ratio
              for n in ns]
    sb = _ratio_slope(ratios, ns)
    ok &= max(ratios) <= 8 and abs(sb) <= 0.05
    details.append(f"REN gap ratios {[round(r, 2) for r in ratios]} "
                   f"slope {sb:+.3f}")
    # (c) one point per branch of both specializations
    for lam_rule, ks in (("rdn", (4.0, 2.5, 1.5, 0.5)),
                         ("ren", (4.5, 3.0, 1.5, 0.5))):
        for k in ks:
            ratios = []
            for n in ns:
                lam = float(n) if lam_rule == "rdn" else 1.0
                nd = max(1.0, n / LN(n) ** k)
                ratios.append(tightness(lam, n, float(n), nd, 3.0).ratio)
            s = _ratio_slope(ratios, ns)
            ok &= max(ratios) <= 8 and abs(s) <= 0.05
            details.append(f"{lam_rule} k={k}: max ratio "
                           f"{max(ratios):.2f} slope {s:+.3f}")
    report(7, ok, "; ".join(details) + f" ({time.time() - t0:.1f}s)")


def test_criterion_8_specialization():
    t0 = time.time()
    ns = [2 ** 16, 2 ** 20, 2 ** 24]
    ok = True
    worst = 1.0
    for which, ks in (("rdn", (4.0, 2.5, 1.5, 0.5)),
                      ("ren", (4.5, 3.0, 1.5, 0.5))):
        for k in ks:
            for n in ns:
                nd = max(1.0, n / LN(n) ** k)
                if which == "rdn":
                    up, _ = upper_bound(float(n), n, float(n), nd, 3.0)
                    ratio = up / rdn_reference(n, nd)
                else:
                    up, _ = upper_bound(1.0, n, float(n), nd, 3.0)
                    ratio = up / ren_reference(n, nd, 3.0)
                ok &= 1 / 8 <= ratio <= 8
                worst = max(worst, ratio, 1 / ratio)
    report(8, ok,
           f"upper/reference within [1/8, 8] over all four regimes of both "
           f"specializations, worst x{worst:.2f} ({time.time() - t0:.1f}s)")


def _criterion9_config(seeds="0..9"):
    return parse_config({
        "mode": "sweep", "n": "2^10..2^16", "lambda": "dense",
        "n_s": "n", "n_d": "4", "schemes": "o&h", "seeds": seeds})


def test_criterion_9_end_to_end_throughput_trend():
    t0 = time.time()
    res = run(_criterion9_config())
    assert res.n_failed == 0
    scheme, slope, err, k = res.slopes[0]
    ok = abs(slope + 0.5) <= 0.15 and k == 7
    report(9, ok,
           f"M_o&h dense-network throughput slope {slope:+.3f} +/- {err:.3f} "
           f"over n in 2^10..2^16, 10 seeds per point (target -0.5 +/- 0.15) "
           f"({time.time() - t0:.0f}s)")


def test_criterion_10_reproducibility():
    # byte-identical CSV bodies on consecutive runs of the criterion-3 and
    # criterion-9 pipelines (reduced sizes; same modes and code paths)
    t0 = time.time()
    perc_bodies = []
    for _ in range(2):
        cfg = parse_config({"mode": "percolate", "n": "10000",
                            "gamma": "0.5pi,4pi", "seeds": "0..4"})
        perc_bodies.append(run(cfg).csv_body())
    sim_bodies = []
    for _ in range(2):
        cfg = parse_config({"mode": "sweep", "n": "2^10..2^13",
                            "lambda": "dense", "n_s": "n", "n_d": "4",
                            "schemes": "o&h", "seeds": "0,1"})
        sim_bodies.append(run(cfg).csv_body())
    ok = perc_bodies[0] == perc_bodies[1] and sim_bodies[0] == sim_bodies[1]
    report(10, ok,
           f"percolate and simulate pipelines byte-identical across runs "
           f"({time.time() - t0:.0f}s)")
