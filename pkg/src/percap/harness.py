"""Experiment configuration, seeded sweeps, slope fitting, CSV emission.

Configs are flat key=value files with command-line overrides (override
wins). Rules for n_s / n_d accept a number, 'n', 'n-1', or 'n/log^K'
(natural log); the lambda rule is a number, 'dense' (lambda = n, power-law
attenuation) or 'extended' (lambda = 1, clamped power-law attenuation).
All validation happens before any computation or output: invalid configs
produce no output file.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from percap import bounds as bnd
from percap import percolation as perc
from percap.backbones import (ORDINARY, PARALLEL, build_access,
                              build_arterial, build_highways,
                              dump_assignments_csv, dump_backbones_csv,
                              estimate_ar_rate, estimate_highway_rate)
from percap.channel import ChannelParams
from percap.errors import ConstructionError, DataError, ParameterError
from percap.routing import (ACCESS, AR, HIGHWAY, CompactTrees,
                            dump_trees_csv, generate_sessions, load_map,
                            measure_throughput, route)
from percap.spatial import deployment_to_csv, sample_deployment

MODES = ("deploy", "percolate", "backbone", "route", "simulate", "bounds", "sweep")
SEED_ENV = "PERCAP_SEEDS"


def parse_int_list(text: str) -> list:
    """'1,2,5' or '0..9' or '2^10..2^16' (powers step x2)."""
    text = text.strip()
    m = re.fullmatch(r"2\^(\d+)\.\.2\^(\d+)", text)
    if m:
        return [2 ** e for e in range(int(m.group(1)), int(m.group(2)) + 1)]
    m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", text)
    if m:
        return list(range(int(m.group(1)), int(m.group(2)) + 1))
    return [int(eval_pow(tok)) for tok in text.split(",") if tok.strip()]


def eval_pow(tok: str) -> float:
    tok = tok.strip()
    m = re.fullmatch(r"2\^(\d+)", tok)
    if m:
        return float(2 ** int(m.group(1)))
    return float(tok)


class CountRule:
    """A count as a function of n: literal, 'n', 'n-1', or 'n/log^K'."""

    def __init__(self, text: str):
        self.text = str(text).strip()
        t = self.text.replace(" ", "")
        if t == "n":
            self._fn = lambda n: float(n)
        elif t == "n-1":
            self._fn = lambda n: float(n - 1)
        else:
            m = re.fullmatch(r"n/\(?log(?:n)?\)?\^([0-9.]+)", t)
            if m:
                k = float(m.group(1))
                self._fn = lambda n: n / math.log(n) ** k
            else:
                try:
                    v = eval_pow(t)
                except ValueError:
                    raise ParameterError(f"cannot parse count rule {text!r}")
                self._fn = lambda n: v

    def value(self, n: int) -> float:
        v = self._fn(n)
        if not math.isfinite(v) or v <= 0:
            raise ParameterError(f"rule {self.text!r} gives {v} at n={n}")
        return v

    def count(self, n: int) -> int:
        return max(1, int(round(self.value(n))))


@dataclass
class ExperimentConfig:
    mode: str
    n_list: list
    lambda_rule: str = "extended"
    n_s_rule: str = "n"
    n_d_rule: str = "4"
    alpha: float = 3.0
    schemes: list = field(default_factory=lambda: ["o&h"])
    seeds: list = field(default_factory=list)
    gammas: list = field(default_factory=lambda: [4.0 * math.pi])
    grid_size: int = 256
    giant_fraction: float = 0.5
    attenuation: str = "auto"
    tree_kind: str = "est"
    ar_kind: str = ""
    out: str = ""
    assignments_out: str = ""

    def lam(self, n: int) -> float:
        if self.lambda_rule == "dense":
            return float(n)
        if self.lambda_rule == "extended":
            return 1.0
        return float(self.lambda_rule)

    def attenuation_mode(self) -> str:
        if self.attenuation != "auto":
            return self.attenuation
        return "dense" if self.lambda_rule == "dense" else "extended"

    def channel(self) -> ChannelParams:
        return ChannelParams(alpha=self.alpha,
                             attenuation_mode=self.attenuation_mode())


def _parse_gamma(tok: str) -> float:
    tok = tok.strip().lower()
    if tok.endswith("pi"):
        return float(tok[:-2] or 1.0) * math.pi
    return float(tok)


def parse_config(pairs: dict) -> ExperimentConfig:
    """Build and validate a config from a flat key=value mapping."""
    known = {"mode", "n", "lambda", "n_s", "n_d", "alpha", "schemes", "seeds",
             "gamma", "grid_size", "giant_fraction", "attenuation",
             "tree_kind", "ar_kind", "out", "assignments_out"}
    unknown = set(pairs) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    mode = pairs.get("mode", "").strip()
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if "n" not in pairs:
        raise ParameterError("config needs n (list of network sizes)")
    n_list = parse_int_list(str(pairs["n"]))
    if not n_list or any(n < 2 for n in n_list):
        raise ParameterError("n values must be >= 2")
    seeds_text = str(pairs.get("seeds", "") or os.environ.get(SEED_ENV, "0"))
    seeds = parse_int_list(seeds_text)
    schemes = [s.strip() for s in str(pairs.get("schemes", "o&h")).split(",")
               if s.strip()]
    for s in schemes:
        if s not in ("o", "p", "o&h", "p&h"):
            raise ParameterError(f"unknown scheme {s!r}")
    lam_rule = str(pairs.get("lambda", "extended")).strip()
    if lam_rule not in ("dense", "extended"):
        try:
            float(lam_rule)
        except ValueError:
            raise ParameterError(f"lambda must be a number, 'dense' or "
                                 f"'extended', got {lam_rule!r}")
    cfg = ExperimentConfig(
        mode=mode,
        n_list=n_list,
        lambda_rule=lam_rule,
        n_s_rule=str(pairs.get("n_s", "n")),
        n_d_rule=str(pairs.get("n_d", "4")),
        alpha=float(pairs.get("alpha", 3.0)),
        schemes=schemes,
        seeds=seeds,
        gammas=[_parse_gamma(t) for t in str(pairs.get("gamma", "4pi")).split(",")],
        grid_size=int(pairs.get("grid_size", 256)),
        giant_fraction=float(pairs.get("giant_fraction", 0.5)),
        attenuation=str(pairs.get("attenuation", "auto")),
        tree_kind=str(pairs.get("tree_kind", "est")),
        ar_kind=str(pairs.get("ar_kind", "")),
        out=str(pairs.get("out", "")),
        assignments_out=str(pairs.get("assignments_out", "")),
    )
    if cfg.alpha <= 2:
        raise ParameterError("alpha must exceed 2")
    if cfg.attenuation not in ("auto", "dense", "extended"):
        raise ParameterError("attenuation must be auto, dense or extended")
    if cfg.tree_kind not in ("est", "emst"):
        raise ParameterError("tree_kind must be est or emst")
    if cfg.grid_size < 32:
        raise ParameterError("grid_size must be >= 32")
    # rules must evaluate on every n before any computation starts
    ns_rule, nd_rule = CountRule(cfg.n_s_rule), CountRule(cfg.n_d_rule)
    for n in cfg.n_list:
        lam = cfg.lam(n)
        if not (1.0 <= lam <= n):
            raise ParameterError(f"lambda {lam} outside [1, n] at n={n}")
        ns, nd = ns_rule.count(n), nd_rule.count(n)
        if mode in ("route", "simulate", "sweep"):
            if not (1 <= nd <= n - 1):
                raise ParameterError(f"n_d={nd} outside [1, n-1] at n={n}")
            if not (1 < ns <= n):
                raise ParameterError(f"n_s={ns} outside (1, n] at n={n}")
    if mode in ("deploy", "backbone", "route"):
        if len(cfg.n_list) != 1 or len(cfg.seeds) != 1:
            raise ParameterError(f"mode {mode} needs exactly one n and one seed")
    return cfg


def read_config_file(path) -> dict:
    pairs = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"bad config line {line!r}")
            k, v = line.split("=", 1)
            pairs[k.strip()] = v.strip()
    return pairs


@dataclass
class SweepResult:
    columns: list
    rows: list
    slopes: list            # (scheme, slope, stderr, n_points)
    n_failed: int

    def csv_body(self) -> str:
        out = [",".join(self.columns)]
        for row in self.rows:
            out.append(",".join(_fmt(row[c]) for c in self.columns))
        return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        if not math.isfinite(v):
            raise DataError("non-finite value in CSV output")
        return repr(float(v))  # shortest round-trip form, numpy scalars included
    return str(v)


def fit_slope(points) -> tuple:
    """Least-squares slope of log(value) vs log(n) with its standard error."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 4:
        raise ParameterError("need at least 4 points for a slope fit")
    if any(v <= 0 or n <= 0 for n, v in pts):
        raise DataError("slope fit needs positive values")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - y.mean())).sum() / sxx)
    resid = y - (y.mean() + slope * (x - xbar))
    dof = len(pts) - 2
    stderr = math.sqrt(float((resid ** 2).sum()) / dof / sxx) if dof > 0 else 0.0
    return slope, stderr


def _simulate_cell(cfg: ExperimentConfig, n: int, seed: int, schemes) -> list:
    lam = cfg.lam(n)
    params = cfg.channel()
    ns = CountRule(cfg.n_s_rule).count(n)
    nd = CountRule(cfg.n_d_rule).count(n)
    rows = []
    d = sample_deployment(n, lam, seed)
    systems = {}

    def get_ar(kind):
        if kind not in systems:
            systems[kind] = build_arterial(d, kind)
        return systems[kind]

    hs = None
    sessions = None
    for scheme in schemes:
        predicted, _ = bnd.scheme_throughput(scheme, lam, n, ns, nd, cfg.alpha)
        base = {"seed": seed, "n": n, "lambda": lam, "n_s": ns, "n_d": nd,
                "scheme": scheme, "predicted": predicted}
        try:
            kind = PARALLEL if scheme in ("p", "p&h") else ORDINARY
            ar = get_ar(kind)
            if scheme.endswith("&h") and hs is None:
                hs = build_highways(d)
            use_hs = hs if scheme.endswith("&h") else None
            if sessions is None:
                sessions = generate_sessions(d, ns, nd, seed)
            compact = CompactTrees(ar, use_hs)
            for s in sessions:
                compact.add(route(s, scheme, use_hs, ar, cfg.tree_kind))
            loads = load_map(compact)
            rates = {
                ACCESS: build_access(d, ar, params).rate_estimate,
                AR: estimate_ar_rate(ar, params),
                HIGHWAY: (estimate_highway_rate(hs, d, params)
                          if use_hs is not None else math.inf),
            }
            rep = measure_throughput(compact, loads, rates)
            thr = rep.throughput if math.isfinite(rep.throughput) else 0.0
            rows.append({**base, "throughput": thr, "ratio": thr / predicted,
                         "bottleneck_layer": rep.bottleneck_layer,
                         "status": "ok"})
        except ConstructionError as exc:
            rows.append({**base, "throughput": 0.0, "ratio": 0.0,
                         "bottleneck_layer": "none",
                         "status": f"failed({exc})".replace(",", ";")})
    return rows


def run(cfg: ExperimentConfig) -> SweepResult:
    """Execute the configured pipeline; deterministic given (config, seeds)."""
    if cfg.mode == "bounds":
        result = _run_bounds(cfg)
    elif cfg.mode == "percolate":
        result = _run_percolate(cfg)
    elif cfg.mode in ("simulate", "sweep"):
        result = _run_simulate(cfg)
    elif cfg.mode == "deploy":
        result = _run_deploy(cfg)
    elif cfg.mode == "backbone":
        result = _run_backbone(cfg)
    elif cfg.mode == "route":
        result = _run_route(cfg)
    else:
        raise ParameterError(f"unhandled mode {cfg.mode}")
    if cfg.out and result.columns:
        with open(cfg.out, "w") as fh:
            fh.write(result.csv_body())
        if cfg.mode == "sweep" and result.slopes:
            stem, ext = os.path.splitext(cfg.out)
            with open(f"{stem}_slopes{ext or '.csv'}", "w") as fh:
                fh.write("scheme,slope,stderr,n_points\n")
                for scheme, slope, err, k in result.slopes:
                    fh.write(f"{scheme},{slope!r},{err!r},{k}\n")
    return result


def _run_bounds(cfg: ExperimentConfig) -> SweepResult:
    cols = ["lambda", "n", "n_s", "n_d", "alpha", "upper", "lc_star", "lower",
            "best_scheme", "ratio", "regime_upper", "regime_lower"]
    rows = []
    ns_rule, nd_rule = CountRule(cfg.n_s_rule), CountRule(cfg.n_d_rule)
    for n in cfg.n_list:
        lam = cfg.lam(n)
        ns, nd = ns_rule.value(n), nd_rule.value(n)
        rep = bnd.tightness(lam, n, ns, nd, cfg.alpha, cfg.grid_size)
        rows.append({"lambda": lam, "n": n, "n_s": ns, "n_d": nd,
                     "alpha": cfg.alpha, "upper": rep.upper,
                     "lc_star": rep.lc_star, "lower": rep.lower,
                     "best_scheme": rep.best_scheme, "ratio": rep.ratio,
                     "regime_upper": rep.regime_upper,
                     "regime_lower": rep.regime_lower})
    return SweepResult(columns=cols, rows=rows, slopes=[], n_failed=0)


def _run_percolate(cfg: ExperimentConfig) -> SweepResult:
    cols = ["seed", "n", "lambda", "r", "gamma", "largest_cluster",
            "num_clusters", "max_exterior_distance", "scaled_max"]
    rows = []
    for n in cfg.n_list:
        lam = cfg.lam(n)
        for seed in cfg.seeds:
            d = sample_deployment(n, lam, seed)
            for gamma in cfg.gammas:
                r = math.sqrt(gamma / (lam * math.pi))
                cl = perc.cluster(d, r, cfg.giant_fraction)
                stats = (perc.exterior_stats(d, cl)
                         if cl.giant_id is not None else None)
                rows.append(perc.cluster_summary_row(seed, d, cl, stats))
    return SweepResult(columns=cols, rows=rows, slopes=[], n_failed=0)


def _run_simulate(cfg: ExperimentConfig) -> SweepResult:
    cols = ["seed", "n", "lambda", "n_s", "n_d", "scheme", "throughput",
            "predicted", "ratio", "bottleneck_layer", "status"]
    rows = []
    for n in cfg.n_list:
        for seed in cfg.seeds:
            rows.extend(_simulate_cell(cfg, n, seed, cfg.schemes))
    n_failed = sum(1 for r in rows if r["status"] != "ok")
    slopes = []
    if cfg.mode == "sweep":
        for scheme in cfg.schemes:
            pts = {}
            for r in rows:
                if r["scheme"] == scheme and r["status"] == "ok" \
                        and r["throughput"] > 0:
                    pts.setdefault(r["n"], []).append(r["throughput"])
            series = [(n, float(np.mean(v))) for n, v in sorted(pts.items())]
            if len(series) >= 4:
                slope, err = fit_slope(series)
                slopes.append((scheme, slope, err, len(series)))
    return SweepResult(columns=cols, rows=rows, slopes=slopes,
                       n_failed=n_failed)


def _run_deploy(cfg: ExperimentConfig) -> SweepResult:
    n, seed = cfg.n_list[0], cfg.seeds[0]
    d = sample_deployment(n, cfg.lam(n), seed)
    if cfg.out:
        deployment_to_csv(d, cfg.out)
    return SweepResult(columns=[], rows=[], slopes=[], n_failed=0)


def _build_systems(cfg: ExperimentConfig, n: int, seed: int):
    d = sample_deployment(n, cfg.lam(n), seed)
    kind = cfg.ar_kind or (PARALLEL if any(s in ("p", "p&h")
                                           for s in cfg.schemes) else ORDINARY)
    ar = build_arterial(d, kind)
    hs = build_highways(d)
    return d, ar, hs


def _run_backbone(cfg: ExperimentConfig) -> SweepResult:
    d, ar, hs = _build_systems(cfg, cfg.n_list[0], cfg.seeds[0])
    if cfg.out:
        dump_backbones_csv(hs, ar, cfg.out)
    if cfg.assignments_out:
        dump_assignments_csv(hs, ar, cfg.assignments_out)
    return SweepResult(columns=[], rows=[], slopes=[], n_failed=0)


def _run_route(cfg: ExperimentConfig) -> SweepResult:
    n, seed = cfg.n_list[0], cfg.seeds[0]
    d, ar, hs = _build_systems(cfg, n, seed)
    ns = CountRule(cfg.n_s_rule).count(n)
    nd = CountRule(cfg.n_d_rule).count(n)
    sessions = generate_sessions(d, ns, nd, seed)
    trees = []
    for scheme in cfg.schemes:
        use_hs = hs if scheme.endswith("&h") else None
        kind = PARALLEL if scheme in ("p", "p&h") else ORDINARY
        if ar.kind != kind:
            ar = build_arterial(d, kind)
        trees.extend(route(s, scheme, use_hs, ar, cfg.tree_kind)
                     for s in sessions)
    if cfg.out:
        dump_trees_csv(trees, cfg.out)
    return SweepResult(columns=[], rows=[], slopes=[], n_failed=0)
