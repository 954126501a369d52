"""Closed-form order evaluators: occupancy, per-scheme throughput formulas,
the percolation upper bound, and regime specializations.

All Theta-constants are set to 1 and log means natural log, so every
downstream assertion is a ratio or trend statement, never absolute equality.
Piecewise branches are stitched continuously (min/max forms and a monotone
occupancy evaluator) so order checks stay finite and monotone at band edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from percap.errors import ParameterError

SCHEMES = ("o", "p", "o&h", "p&h")


def occupancy_L(m: float, n: float, polylog_power: float = 1.0) -> float:
    """Order of the maximum bin load for m balls in n bins (unit constants).

    Piecewise per the three occupancy bands, with the first/second band
    stitched at their crossing value and floors/caps (1 <= L <= m,
    L >= m/n) keeping the evaluator finite and monotone in m. The
    first/second band split sits at n / (log n)^polylog_power.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    if n <= 0:
        raise ParameterError("n must be positive")
    if n <= math.e:
        # fewer bins than e: load-bound regime only
        return min(m, max(m / n, 1.0))
    ln_n = math.log(n)
    t1 = n / ln_n ** polylog_power
    stitch = ln_n / (polylog_power * math.log(ln_n)) if polylog_power > 0 else math.inf
    if m < t1:
        val = ln_n / math.log(n / m)
    else:
        mid = ln_n / max(math.log(n * ln_n / m), 1.0)
        val = max(mid, stitch, m / n)
    return min(max(val, m / n, 1.0), m)


def occupancy_simulate(m: int, n: int, trials: int, seed: int) -> np.ndarray:
    """Monte Carlo of the exact max bin load; oracle for occupancy_L."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if m < 1 or n < 1:
        raise ParameterError("m and n must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty(trials, dtype=np.int64)
    # chunk trials to bound the trials x n working set
    chunk = max(1, int(2e7 / max(n, 1)))
    done = 0
    pvals = np.full(n, 1.0 / n)
    while done < trials:
        t = min(chunk, trials - done)
        counts = rng.multinomial(m, pvals, size=t)
        out[done:done + t] = counts.max(axis=1)
        done += t
    return out


# --- Table rates and sharing probabilities ---------------------------------

def rate_oar(lam: float, n: float, alpha: float) -> float:
    """Sustainable ordinary arterial-road rate (order)."""
    return min((lam / math.log(n)) ** (alpha / 2.0), 1.0)


def rate_par(lam: float, n: float, alpha: float) -> float:
    """Sustainable parallel arterial-road rate (order)."""
    ln_n = math.log(n)
    return min((lam / ln_n) ** (alpha / 2.0), 1.0 / ln_n)


def rate_par_threshold(n: float, alpha: float) -> float:
    """Density at which the parallel road rate saturates: (log n)^(1-2/alpha)."""
    return math.log(n) ** (1.0 - 2.0 / alpha)


def p_o(n: float, nd: float) -> float:
    return min(math.sqrt(nd * math.log(n) / n), 1.0)


def p_p(n: float, nd: float) -> float:
    ln_n = math.log(n)
    if nd <= n / ln_n:
        return math.sqrt(nd / (n * ln_n))
    return min(nd / n, 1.0)


def p_oh_oar(n: float, nd: float, const: float = 1.0) -> float:
    return min(const * nd * math.log(n) ** 1.5 / n, 1.0)


def p_oh_h(n: float, nd: float) -> float:
    # three branches join continuously as min(max(...), 1)
    return min(max(math.sqrt(nd / n), nd * math.log(n) / n), 1.0)


p_ph_h = p_oh_h


def p_ph_par(n: float, nd: float) -> float:
    return min(nd * math.sqrt(math.log(n)) / n, 1.0)


def scheme_throughput(scheme: str, lam: float, n: float, ns: float, nd: float,
                      alpha: float) -> tuple[float, str]:
    """Order throughput of one routing scheme plus its binding-part label."""
    if scheme == "o":
        return rate_oar(lam, n, alpha) / occupancy_L(ns, 1.0 / p_o(n, nd)), "ar"
    if scheme == "p":
        return rate_par(lam, n, alpha) / occupancy_L(ns, 1.0 / p_p(n, nd)), "ar"
    if scheme == "o&h":
        ar = rate_oar(lam, n, alpha) / occupancy_L(ns, 1.0 / p_oh_oar(n, nd))
        hw = 1.0 / occupancy_L(ns, 1.0 / p_oh_h(n, nd))
        return (ar, "ar") if ar <= hw else (hw, "hw")
    if scheme == "p&h":
        ar = rate_par(lam, n, alpha) / occupancy_L(ns, 1.0 / p_ph_par(n, nd))
        hw = 1.0 / occupancy_L(ns, 1.0 / p_ph_h(n, nd))
        return (ar, "ar") if ar <= hw else (hw, "hw")
    raise ParameterError(f"unknown scheme {scheme!r}")


def _check_domain(lam, n, ns, nd, alpha):
    if not (1.0 <= lam <= n):
        raise ParameterError("lambda must lie in [1, n]")
    if not (1.0 <= nd <= n):
        raise ParameterError("n_d must lie in [1, n]")
    if not (1.0 < ns <= n):
        raise ParameterError("n_s must lie in (1, n]")
    if alpha <= 2:
        raise ParameterError("alpha must exceed 2")


def lower_bound(lam: float, n: float, ns: float, nd: float,
                alpha: float) -> tuple[float, str]:
    """Best achievable order throughput over the four schemes."""
    _check_domain(lam, n, ns, nd, alpha)
    best, best_scheme = -1.0, ""
    for s in SCHEMES:
        v, _ = scheme_throughput(s, lam, n, ns, nd, alpha)
        if v > best:
            best, best_scheme = v, s
    return best, best_scheme


def lower_bound_regime(lam: float, n: float, ns: float, nd: float,
                       alpha: float) -> str:
    val, scheme = lower_bound(lam, n, ns, nd, alpha)
    _, part = scheme_throughput(scheme, lam, n, ns, nd, alpha)
    return f"{scheme}:{part}"


def upper_bound_curves(lam, n, ns, nd, alpha, lc):
    """Interior and exterior branch values of the upper bound at each lc."""
    ln_n = math.log(n)
    lc = np.asarray(lc, dtype=np.float64)
    interior = np.empty_like(lc)
    exterior = np.empty_like(lc)
    num_ext = min(1.0, (lam / ln_n) ** (alpha / 2.0))
    for i, l in enumerate(lc):
        bins_int = math.sqrt(n) / (l * math.sqrt(nd * lam))
        interior[i] = min(1.0, l ** (-alpha)) / occupancy_L(ns, bins_int)
        bins_ext = n * math.sqrt(lam) * l / (nd * math.sqrt(ln_n))
        exterior[i] = num_ext / occupancy_L(ns, bins_ext)
    return interior, exterior


def upper_bound(lam: float, n: float, ns: float, nd: float, alpha: float,
                grid_size: int = 256) -> tuple[float, float]:
    """Percolation upper bound: max over the admissible link-length range
    of the min of the giant-interior and giant-exterior branch values.

    The maximizer search uses a log-spaced grid (endpoints included); on a
    plateau the largest maximizing link length is reported.
    """
    _check_domain(lam, n, ns, nd, alpha)
    if grid_size < 32:
        raise ParameterError("grid_size must be >= 32")
    lo = 1.0 / math.sqrt(lam)
    hi = math.sqrt(max(math.log(n), 0.0) / lam)
    if lo >= hi:
        lc = np.array([lo])
    else:
        lc = np.exp(np.linspace(math.log(lo), math.log(hi), grid_size))
    interior, exterior = upper_bound_curves(lam, n, ns, nd, alpha, lc)
    vals = np.minimum(interior, exterior)
    best = float(vals.max())
    at_best = vals >= best * (1.0 - 1e-12)
    lc_star = float(lc[np.flatnonzero(at_best).max()])
    return best, lc_star


def upper_bound_regime(lam, n, ns, nd, alpha, grid_size: int = 256) -> str:
    _, lc_star = upper_bound(lam, n, ns, nd, alpha, grid_size)
    i, e = upper_bound_curves(lam, n, ns, nd, alpha, [lc_star])
    if abs(i[0] - e[0]) <= 1e-12 * max(i[0], e[0]):
        return "balanced"
    return "interior" if i[0] < e[0] else "exterior"


# --- RDN / REN specializations and prior bounds -----------------------------

def rdn_reference(n: float, nd: float) -> float:
    """Dense-network (lambda = n, n_s = n) capacity order, four branches."""
    ln_n = math.log(n)
    if nd <= n / ln_n ** 3:
        return 1.0 / math.sqrt(nd * n)
    if nd <= n / ln_n ** 2:
        return 1.0 / (nd * ln_n ** 1.5)
    if nd <= n / ln_n:
        return 1.0 / math.sqrt(n * nd * ln_n)
    return 1.0 / n


def rdn_regime(n: float, nd: float) -> str:
    ln_n = math.log(n)
    if nd <= n / ln_n ** 3:
        return "rdn-1"
    if nd <= n / ln_n ** 2:
        return "rdn-2"
    if nd <= n / ln_n:
        return "rdn-3"
    return "rdn-4"


def ren_reference(n: float, nd: float, alpha: float) -> float:
    """Extended-network (lambda = 1, n_s = n) capacity order, four branches."""
    ln_n = math.log(n)
    if nd <= n / ln_n ** (alpha + 1):
        return 1.0 / math.sqrt(nd * n)
    if nd <= n / ln_n ** 2:
        return 1.0 / (nd * ln_n ** ((alpha + 1) / 2.0))
    if nd <= n / ln_n:
        return 1.0 / (math.sqrt(n * nd) * ln_n ** ((alpha - 1) / 2.0))
    return 1.0 / (nd * ln_n ** (alpha / 2.0))


def ren_regime(n: float, nd: float, alpha: float) -> str:
    ln_n = math.log(n)
    if nd <= n / ln_n ** (alpha + 1):
        return "ren-1"
    if nd <= n / ln_n ** 2:
        return "ren-2"
    if nd <= n / ln_n:
        return "ren-3"
    return "ren-4"


def prior_bounds(n: float, nd: float, which: str, alpha: float = 3.0) -> float:
    """Pre-existing literature upper bounds for gap visualization."""
    ln_n = math.log(n)
    if which == "rdn":
        if nd <= n / ln_n ** 2:
            return 1.0 / math.sqrt(nd * n)
        if nd <= n / ln_n:
            return 1.0 / (nd * ln_n)
        return 1.0 / n
    if which == "ren":
        if nd <= n / ln_n ** alpha:
            return 1.0 / math.sqrt(nd * n)
        return 1.0 / (nd * ln_n ** (alpha / 2.0))
    raise ParameterError("which must be 'rdn' or 'ren'")


# --- Tightness --------------------------------------------------------------

@dataclass
class BoundSpec:
    """A named order evaluator with a regime labeler."""

    name: str
    eval: Callable
    regime: Callable


@dataclass
class CapacityReport:
    upper: float
    lc_star: float
    lower: float
    best_scheme: str
    ratio: float
    regime_upper: str
    regime_lower: str
    tight: bool


def tightness(lam: float, n: float, ns: float, nd: float, alpha: float,
              grid_size: int = 256, slack: float = 8.0) -> CapacityReport:
    """Upper/lower comparison at one parameter point.

    The pointwise ``tight`` flag is ratio <= slack; trend-freeness across an
    n-sweep is asserted by the callers that own the sweep.
    """
    up, lc_star = upper_bound(lam, n, ns, nd, alpha, grid_size)
    low, scheme = lower_bound(lam, n, ns, nd, alpha)
    ratio = up / low
    return CapacityReport(
        upper=up, lc_star=lc_star, lower=low, best_scheme=scheme,
        ratio=ratio,
        regime_upper=upper_bound_regime(lam, n, ns, nd, alpha, grid_size),
        regime_lower=lower_bound_regime(lam, n, ns, nd, alpha),
        tight=bool(ratio <= slack),
    )


BOUND_SPECS = {
    "upper": BoundSpec("upper", lambda lam, n, ns, nd, alpha:
                       upper_bound(lam, n, ns, nd, alpha)[0], upper_bound_regime),
    "lower": BoundSpec("lower", lambda lam, n, ns, nd, alpha:
                       lower_bound(lam, n, ns, nd, alpha)[0],
                       lower_bound_regime),
}
