import math

import numpy as np
import pytest

from percap.channel import (ChannelParams, SchedulingSet, TdmaSchedule,
                            interference_power, link_rate, sustained_rate,
                            tdma_color)
from percap.errors import ParameterError
from percap.spatial import make_lattice


def test_params_validation():
    with pytest.raises(ParameterError):
        ChannelParams(alpha=2.0)
    with pytest.raises(ParameterError):
        ChannelParams(P=0.0)
    with pytest.raises(ParameterError):
        ChannelParams(attenuation_mode="fancy")


def test_unit_sinr_gives_unit_rate():
    p = ChannelParams(P=1.0, N0=1.0, B=1.0, alpha=3.0,
                      attenuation_mode="extended")
    assert link_rate(p, (0.0, 0.0), (1.0, 0.0)) == pytest.approx(1.0)


def test_interferer_strictly_decreases_rate():
    p = ChannelParams(alpha=3.0)
    base = link_rate(p, (0, 0), (1, 0))
    for pos in ((5.0, 5.0), (2.0, 0.0), (100.0, 0.0)):
        assert link_rate(p, (0, 0), (1, 0), [pos]) < base


def test_dense_vs_extended_attenuation_split():
    dense = ChannelParams(alpha=3.0, attenuation_mode="dense")
    ext = ChannelParams(alpha=3.0, attenuation_mode="extended")
    # d = 0.5: dense loss = 8, extended clamps at 1
    assert link_rate(dense, (0, 0), (0.5, 0)) == pytest.approx(math.log2(1 + 8.0))
    assert link_rate(ext, (0, 0), (0.5, 0)) == pytest.approx(math.log2(2.0))


def test_zero_distance_rejected():
    p = ChannelParams()
    with pytest.raises(ParameterError):
        link_rate(p, (1.0, 1.0), (1.0, 1.0))


def test_rate_monotone_in_distance():
    p = ChannelParams(alpha=3.5)
    interferers = [(3.0, 4.0), (10.0, 0.0)]
    rates = [link_rate(p, (0, 0), (x, 0), interferers)
             for x in (0.3, 0.7, 1.0, 1.8, 4.0)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_scheduling_set_invariants():
    SchedulingSet(slot=0, links=[(0, 1), (2, 3)])
    with pytest.raises(ParameterError):
        SchedulingSet(slot=0, links=[(0, 1), (0, 3)])   # duplicate transmitter
    with pytest.raises(ParameterError):
        SchedulingSet(slot=0, links=[(0, 1), (1, 3)])   # rx also tx


def test_tdma_color_k4():
    lat = make_lattice(4.0, 1.0, 0.0)
    colors = tdma_color(lat, 4)
    assert colors.shape == (4, 4)
    for c in range(4):
        rows, cols = np.nonzero(colors == c)
        assert len(rows) == 4
        assert (np.diff(np.unique(rows)) == 2).all()
        assert (np.diff(np.unique(cols)) == 2).all()


def test_tdma_color_k9_separation():
    lat = make_lattice(9.0, 1.0, 0.0)
    colors = tdma_color(lat, 9)
    for c in range(9):
        cells = np.argwhere(colors == c)
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                dr = abs(cells[i][0] - cells[j][0])
                dc = abs(cells[i][1] - cells[j][1])
                assert max(dr, dc) >= 3


def test_tdma_color_rejects_non_square():
    lat = make_lattice(4.0, 1.0, 0.0)
    with pytest.raises(ParameterError):
        tdma_color(lat, 5)


def test_same_slot_interference_distance():
    # tx in one active cell, rx in another same-color cell: distance between
    # any tx and the other link's rx is at least (sqrt(k) - 2) * cell side
    rng = np.random.default_rng(3)
    for k in (4, 9):
        s = int(math.isqrt(k))
        lat = make_lattice(12.0, 1.0, 0.0)
        colors = tdma_color(lat, k)
        cells = np.argwhere(colors == 0)
        for _ in range(200):
            a, b = cells[rng.choice(len(cells), 2, replace=False)]
            pa = a[::-1] + rng.random(2)   # (x, y) inside cell a
            pb = b[::-1] + rng.random(2)
            assert math.hypot(*(pa - pb)) >= (s - 2) * 1.0 - 1e-12


def _schedule(period, subslots, assignment, positions):
    return TdmaSchedule(period=period, subslots_per_slot=subslots,
                        positions=np.asarray(positions, float),
                        assignment=assignment)


def test_sustained_rate_single_link_period_one():
    p = ChannelParams(alpha=3.0)
    pos = [(0.0, 0.0), (1.0, 0.0)]
    sched = _schedule(1, 1, {(0, 1): (0, 0)}, pos)
    assert sustained_rate(p, sched, (0, 1)) == pytest.approx(
        link_rate(p, pos[0], pos[1]))


def test_sustained_rate_period_nine_exact_share():
    p = ChannelParams(alpha=3.0)
    pos = [(0.0, 0.0), (1.0, 0.0), (9.0, 0.0), (10.0, 0.0)]
    assign = {(0, 1): (0, 0), (2, 3): (0, 0)}
    one = _schedule(1, 1, dict(assign), pos)
    nine = _schedule(9, 1, dict(assign), pos)
    assert sustained_rate(p, nine, (0, 1)) == pytest.approx(
        sustained_rate(p, one, (0, 1)) / 9.0)


def test_time_sharing_exactness():
    p = ChannelParams(alpha=3.0)
    pos = [(0.0, 0.0), (1.0, 0.0), (7.0, 2.0), (8.0, 2.0)]
    assign = {(0, 1): (0, 0), (2, 3): (0, 0)}
    sched = _schedule(4, 3, assign, pos)
    single = link_rate(p, pos[0], pos[1], [pos[2]])
    assert sustained_rate(p, sched, (0, 1)) * 4 * 3 == pytest.approx(single)


def test_sustained_rate_unscheduled_link():
    p = ChannelParams()
    sched = _schedule(1, 1, {(0, 1): (0, 0)}, [(0, 0), (1, 0)])
    with pytest.raises(ParameterError):
        sustained_rate(p, sched, (5, 6))


def test_interference_bounded_under_tdma_colorings():
    # one transmitter per active cell on a k-TDMA coloring at unit density:
    # total interference at random receivers stays below a constant that
    # does not grow with n (ring sum converges for alpha > 2)
    p = ChannelParams(alpha=3.0, attenuation_mode="extended")
    rng = np.random.default_rng(11)
    worst = {}
    for n in (2 ** 12, 2 ** 18):
        side = math.sqrt(n)
        cell = 3.0 * math.sqrt(math.log(n))
        cells = int(side // cell)
        for k in (4, 9):
            s = int(math.isqrt(k))
            ii, jj = np.meshgrid(range(cells), range(cells), indexing="ij")
            active = (ii % s == 0) & (jj % s == 0)
            txs = np.column_stack([(jj[active] + 0.5) * cell,
                                   (ii[active] + 0.5) * cell])
            vals = []
            for _ in range(400):
                rx = rng.random(2) * side
                d = np.hypot(txs[:, 0] - rx[0], txs[:, 1] - rx[1])
                d = d[d > cell * (s - 2) / 2 + 1e-9]  # exclude the local cell
                vals.append(float(np.minimum(1.0, d ** -3.0).sum()))
            worst[(n, k)] = max(vals)
    for k in (4, 9):
        assert worst[(2 ** 18, k)] <= max(2.0 * worst[(2 ** 12, k)], 1.0)


def test_interference_power_helper():
    p = ChannelParams(alpha=3.0, attenuation_mode="dense")
    val = interference_power(p, (0.0, 0.0), [(2.0, 0.0), (0.0, 4.0)])
    assert val == pytest.approx(2.0 ** -3 + 4.0 ** -3)


def test_schedule_rates_csv(tmp_path):
    from percap.channel import schedule_rates_csv
    p = ChannelParams(alpha=3.0)
    pos = [(0.0, 0.0), (1.0, 0.0), (9.0, 0.0), (10.0, 0.0)]
    sched = _schedule(4, 2, {(0, 1): (0, 0), (2, 3): (1, 1)}, pos)
    path = tmp_path / "rates.csv"
    schedule_rates_csv(p, sched, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "slot,subslot,tx,rx,rate"
    assert len(lines) == 3
    slot, sub, tx, rx, rate = lines[1].split(",")
    assert (tx, rx) == ("0", "1") and float(rate) > 0
