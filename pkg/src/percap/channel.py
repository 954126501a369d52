"""Generalized physical (SINR) link rates and TDMA scheduling machinery.

Rates are B * log2(1 + SINR) with attenuation x^-alpha (dense mode) or
min(1, x^-alpha) (extended mode, the default). Defaults P = N0 = B = 1:
every claim checked downstream is a ratio or trend, insensitive to these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from percap.errors import ParameterError
from percap.spatial import SchemeLattice

DENSE = "dense"
EXTENDED = "extended"


@dataclass(frozen=True)
class ChannelParams:
    P: float = 1.0
    N0: float = 1.0
    B: float = 1.0
    alpha: float = 3.0
    attenuation_mode: str = EXTENDED

    def __post_init__(self):
        if self.alpha <= 2:
            raise ParameterError("alpha must exceed 2")
        if min(self.P, self.N0, self.B) <= 0:
            raise ParameterError("P, N0, B must be positive")
        if self.attenuation_mode not in (DENSE, EXTENDED):
            raise ParameterError("attenuation_mode must be 'dense' or 'extended'")

    def attenuation(self, dist):
        """Power attenuation at the given distance(s)."""
        d = np.asarray(dist, dtype=np.float64)
        with np.errstate(divide="ignore"):
            loss = d ** (-self.alpha)
        if self.attenuation_mode == EXTENDED:
            loss = np.minimum(1.0, loss)
        return loss


def interference_power(params: ChannelParams, rx, interferer_positions) -> float:
    """Total received interference power at rx from the given transmitters."""
    pts = np.asarray(interferer_positions, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return 0.0
    d = np.hypot(pts[:, 0] - rx[0], pts[:, 1] - rx[1])
    return float(params.P * params.attenuation(d).sum())


def link_rate(params: ChannelParams, tx, rx, interferers=()) -> float:
    """Rate of tx->rx given simultaneous interfering transmitters."""
    d = math.hypot(tx[0] - rx[0], tx[1] - rx[1])
    if d == 0.0:
        raise ParameterError("zero-distance link")
    signal = params.P * float(params.attenuation(d))
    sinr = signal / (params.N0 + interference_power(params, rx, interferers))
    return params.B * math.log2(1.0 + sinr)


@dataclass
class SchedulingSet:
    """Links allowed to transmit simultaneously in one slot."""

    slot: int
    links: list

    def __post_init__(self):
        txs = [l[0] for l in self.links]
        if len(set(txs)) != len(txs):
            raise ParameterError("a node transmits twice in one scheduling set")
        rxs = {l[1] for l in self.links}
        if rxs & set(txs):
            raise ParameterError("a receiver is also a transmitter in the set")


def tdma_color(lat: SchemeLattice, k: int) -> np.ndarray:
    """Periodic sqrt(k) x sqrt(k) cell coloring; returns a (rows, cols) slot grid."""
    s = math.isqrt(int(k))
    if s * s != k:
        raise ParameterError("TDMA period must be a perfect square (4 or 9)")
    rows = np.arange(lat.rows)[:, None] % s
    cols = np.arange(lat.cols)[None, :] % s
    return (rows * s + cols).astype(np.int64)


@dataclass
class TdmaSchedule:
    """Assignment of links to (slot, subslot) pairs under a k-TDMA frame.

    ``positions`` maps node index -> coordinates for rate evaluation;
    ``assignment`` maps (tx, rx) -> (slot, subslot).
    """

    period: int
    subslots_per_slot: int
    positions: np.ndarray
    assignment: dict
    structure: str = ""
    _groups: dict = field(default_factory=dict, repr=False)

    def co_scheduled(self, link) -> list:
        """Other links sharing this link's (slot, subslot)."""
        if not self._groups:
            for l, sl in self.assignment.items():
                self._groups.setdefault(sl, []).append(l)
        return [l for l in self._groups[self.assignment[link]] if l != link]

    def scheduling_set(self, slot: int, subslot: int = 0) -> SchedulingSet:
        links = [l for l, sl in self.assignment.items() if sl == (slot, subslot)]
        return SchedulingSet(slot=slot, links=links)


def schedule_rates_csv(params: ChannelParams, sched: TdmaSchedule, path) -> None:
    """Write the per-link rate table: (slot, subslot, tx, rx, rate)."""
    with open(path, "w") as fh:
        fh.write("slot,subslot,tx,rx,rate\n")
        for link in sorted(sched.assignment):
            slot, sub = sched.assignment[link]
            rate = sustained_rate(params, sched, link)
            fh.write(f"{slot},{sub},{link[0]},{link[1]},{float(rate)!r}\n")


def sustained_rate(params: ChannelParams, sched: TdmaSchedule, link) -> float:
    """Time-shared rate of a scheduled link.

    The link's single-activation rate is evaluated against its co-scheduled
    transmitters (the deterministic worst case for this frame), then divided
    by period * subslots_per_slot.
    """
    if link not in sched.assignment:
        raise ParameterError(f"link {link} is not scheduled")
    interferers = [sched.positions[tx] for tx, _ in sched.co_scheduled(link)]
    rate = link_rate(params, sched.positions[link[0]], sched.positions[link[1]],
                     interferers)
    return rate / (sched.period * sched.subslots_per_slot)
