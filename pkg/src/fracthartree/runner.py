"""Configuration-driven experiment runner.

A run is described by one YAML document::

    experiment: illposed
    params: {alpha: 1.5, sigma: 1.0}
    grid: {n_points: 8192, r_max: 64.0}
    settings: {s: -0.25, lams: [4, 8, 16, 32]}
    output_dir: runs/illposed

and produces ``manifest.json``, CSV tables and binary field files inside the
output directory.  Exit status: 0 when every check passes, 1 on a numerical
failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import (evolve, free_propagate, local_time_probe, picard_iterate, rescale,
                       scattering_extract)
from .estimates import (BumpPair, NonConvergenceWarning, band_profile, bernstein_scan,
                        bilinear_scan, brute_force_I, closed_form_I, loglog_slope,
                        random_atom, sample_admissible, strichartz_ratio,
                        sum_bilinear_check, transference_scan, vanishing_threshold)
from .illposedness import growth_experiment, phase_smallness
from .io import read_json, write_csv, write_fields, write_json
from .littlewood_paley import build_bump, project_gt, project_leq, resolvable_range
from .spectral import (ModelParams, RadialField, RadialGrid, forward_transform,
                       inverse_transform, l2_norm, riesz_convolution, sobolev_norm)

WORKERS_ENV = "FRACTHARTREE_WORKERS"

EXIT_PASS, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, msg, line=None, source="<config>"):
        self.line = line
        loc = f"{source}:{line}" if line is not None else source
        super().__init__(f"{loc}: {msg}")


# -- experiment defaults ---------------------------------------------------------

_GRIDS = {
    "evolve": (2048, 64.0), "picard": (2048, 64.0), "scatter": (4096, 512.0),
    "lemma22": None, "bilinear": (16384, 64.0), "bernstein": (16384, 64.0),
    "strichartz": (4096, 128.0), "transference": (2048, 64.0), "sumbil": (2048, 64.0),
    "illposed": (8192, 64.0), "localtime": (2048, 64.0), "selftest": (2048, 64.0),
}

DEFAULTS = {
    "evolve": {"norm": 0.5, "T": 10.0, "dt": 0.0125, "save_every": 80,
               "mass_tol": 1e-8, "energy_tol": 1e-5},
    "picard": {"norm": 0.05, "T": 5.0, "dt": 0.05, "k_max": 6, "ratio_tol": 0.5,
               "match_tol": 1e-8},
    "scatter": {"norm": 0.2, "dt": 0.02, "probe_times": [5.0, 10.0, 20.0, 40.0]},
    "lemma22": {"n_samples": 20, "pair": [2.0, 0.3, 1.0, 0.2], "eps": 0.01,
                "rel_tol": 0.01, "seed": 0},
    "bilinear": {"mu": 1.0, "lams": [8, 16, 32, 64], "slope_tol": 0.1},
    "bernstein": {"triples": [[1, 4, 4], [1, 8, 8], [1, 16, 16], [4, 1, 4], [8, 1, 8],
                              [16, 1, 16]]},
    "strichartz": {"q": 4.0, "r": 3.0, "lams": [1, 2, 4, 8], "variation_tol": 2.0},
    "transference": {"n_atoms": 50, "n_pieces": 4, "mu": 1.0, "lam": 8.0, "window": 1.0,
                     "factor_tol": 4.0, "seed": 0},
    "sumbil": {"bands": [4, 8], "far_band": 0.5, "far_amplitude": 0.5, "n_pieces": 3,
               "window": 1.0, "stability_tol": 2.0, "seed": 0},
    "illposed": {"s": -0.25, "lams": [4, 8, 16, 32], "eps": 0.05},
    "localtime": {"r": 2.0, "Lambdas": [2, 4, 8, 16], "n_steps": 64, "bisections": 14,
                  "slope_tol": 0.2},
    "selftest": {},
}

EXPERIMENTS = tuple(DEFAULTS)
_TOP_KEYS = {"experiment", "params", "grid", "settings", "output_dir", "seed"}
_PARAM_KEYS = {"alpha", "sigma"}
_GRID_KEYS = {"n_points", "r_max"}


@dataclass
class RunConfig:
    experiment: str
    params: ModelParams
    grid: RadialGrid | None
    settings: dict
    output_dir: Path
    seed: int = 0

    def echo(self) -> dict:
        return {"experiment": self.experiment,
                "params": {"alpha": self.params.alpha, "sigma": self.params.sigma},
                "grid": None if self.grid is None else
                {"n_points": self.grid.n_points, "r_max": self.grid.r_max},
                "settings": self.settings, "output_dir": str(self.output_dir),
                "seed": self.seed}


@dataclass
class Check:
    name: str
    value: object
    criterion: str
    passed: bool

    def as_dict(self):
        return {"name": self.name, "value": self.value, "criterion": self.criterion,
                "passed": bool(self.passed)}


@dataclass
class RunManifest:
    config: dict
    version: str
    status: str = "running"
    wall_clock: float = 0.0
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    def as_dict(self):
        return {"config": self.config, "version": self.version, "status": self.status,
                "wall_clock": self.wall_clock, "checks": [c.as_dict() for c in self.checks],
                "results": self.results, "files": self.files, "error": self.error}


# -- config parsing ------------------------------------------------------------------

def _to_python(node, lines, path=()):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", k.start_mark.line + 1)
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _to_python(v, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _check_keys(d, allowed, lines, path, source):
    if not isinstance(d, dict):
        raise ConfigError(f"'{'.'.join(map(str, path)) or 'document'}' must be a mapping",
                          lines.get(path), source)
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown key {'.'.join(map(str, path + (k,)))!r}",
                              lines.get(path + (k,)), source)


def parse_config(text: str, source: str = "<config>", output_override=None) -> RunConfig:
    """Validate a YAML document and fill in defaults."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1, source) from None
    if node is None:
        raise ConfigError("empty configuration", 1, source)
    lines: dict = {}
    raw = _to_python(node, lines)
    _check_keys(raw, _TOP_KEYS, lines, (), source)
    name = raw.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {name!r}",
                          lines.get(("experiment",), 1), source)
    p = raw.get("params", {}) or {}
    _check_keys(p, _PARAM_KEYS, lines, ("params",), source)
    try:
        params = ModelParams(alpha=float(p.get("alpha", 1.5)), sigma=float(p.get("sigma", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), lines.get(("params",)), source) from None
    g = raw.get("grid")
    grid = None
    if g is not None:
        _check_keys(g, _GRID_KEYS, lines, ("grid",), source)
        try:
            grid = RadialGrid(int(g.get("n_points", 2048)), float(g.get("r_max", 64.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), lines.get(("grid",)), source) from None
    elif _GRIDS[name] is not None:
        grid = RadialGrid(*_GRIDS[name])
    s = raw.get("settings", {}) or {}
    _check_keys(s, set(DEFAULTS[name]), lines, ("settings",), source)
    settings = dict(DEFAULTS[name])
    for k, v in s.items():
        want = type(DEFAULTS[name][k])
        if want is float and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if not isinstance(v, want) or isinstance(v, bool) != isinstance(DEFAULTS[name][k], bool):
            raise ConfigError(f"settings.{k} must be {want.__name__}, got {type(v).__name__}",
                              lines.get(("settings", k)), source)
        settings[k] = v
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer", lines.get(("seed",)), source)
    out = output_override or raw.get("output_dir") or f"runs/{name}"
    return RunConfig(name, params, grid, settings, Path(out), seed)


def load_config(path, output_override=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path), output_override)


# -- helpers --------------------------------------------------------------------------

def workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = workers()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


def gaussian_datum(grid: RadialGrid, norm: float, width: float = 1.0) -> RadialField:
    f = grid.field(lambda r: np.exp(-0.5 * (r / width) ** 2))
    return f * (norm / l2_norm(f))


class _Ctx:
    def __init__(self, cfg: RunConfig, manifest: RunManifest):
        self.cfg, self.m = cfg, manifest

    @property
    def grid(self):
        return self.cfg.grid

    @property
    def params(self):
        return self.cfg.params

    @property
    def s(self):
        return self.cfg.settings

    def check(self, name, value, criterion, passed):
        self.m.checks.append(Check(name, value, criterion, bool(passed)))

    def table(self, name, rows, columns=None):
        p = write_csv(self.cfg.output_dir / f"{name}.csv", rows, columns)
        self.m.files.append(p.name)

    def fields(self, name, fields):
        p = write_fields(self.cfg.output_dir / f"{name}.rfld", fields)
        self.m.files.append(p.name)


# -- experiments ----------------------------------------------------------------------

def _exp_selftest(c: _Ctx):
    g, a = c.grid, c.params.alpha
    f = gaussian_datum(g, 1.0)
    F = forward_transform(f)
    c.check("round_trip", l2_norm(inverse_transform(F) - f), "< 1e-12",
            l2_norm(inverse_transform(F) - f) < 1e-12)
    pl = abs(np.sqrt(np.abs(F.values) ** 2 @ g.spectral_weights) - l2_norm(f))
    c.check("plancherel", pl, "< 1e-12", pl < 1e-12)
    s0 = abs(sobolev_norm(f, 0.0) - l2_norm(f))
    c.check("sobolev_s0_is_l2", s0, "< 1e-12", s0 < 1e-12)
    unit = abs(l2_norm(free_propagate(f, 3.7, a)) - 1.0)
    c.check("free_flow_unitary", unit, "< 1e-10", unit < 1e-10)
    # Coulomb potential of a Gaussian density against the erf closed form
    n = np.exp(-g.r**2)
    V = riesz_convolution(RadialField(g, n), 1.0).values.real
    from scipy.special import erf
    exact = np.pi**1.5 * erf(g.r) / g.r
    e = float(np.max(np.abs(V - exact)[g.r < g.r_max / 4]))
    c.check("riesz_coulomb_closed_form", e, "< 1e-8", e < 1e-8)
    bump = build_bump()
    lo, hi = resolvable_range(g)
    rho = g.rho
    tot = bump.chi_leq(rho, 2.0**lo) + sum(bump.chi_lam(rho, 2.0**k) for k in range(lo + 1, hi + 1))
    tot = tot + bump.chi_gt(rho, 2.0**hi)
    pu = float(np.max(np.abs(tot - 1)))
    c.check("partition_of_unity", pu, "< 1e-15", pu < 1e-15)
    lam = 2.0 ** ((lo + hi) // 2)
    split = l2_norm(project_leq(f, lam) + project_gt(f, lam) - f)
    c.check("leq_gt_split", split, "< 1e-13", split < 1e-13)
    tl = float(np.max(np.abs(bump.chi_tilde(rho, lam) * bump.chi_lam(rho, lam)
                             - bump.chi_lam(rho, lam))))
    c.check("tilde_is_identity_on_band", tl, "== 0", tl == 0.0)
    c.m.results["resolvable_range"] = [lo, hi]


def _exp_evolve(c: _Ctx):
    s = c.s
    f = gaussian_datum(c.grid, s["norm"])
    res = {}
    for label, dt in (("dt", s["dt"]), ("dt_half", s["dt"] / 2)):
        tr = evolve(f, s["T"], c.params, dt, save_every=s["save_every"] * (1 if label == "dt" else 2))
        m_drift = float(np.max(np.abs(tr.mass - tr.mass[0])) / tr.mass[0])
        e_drift = float(np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0]))
        res[label] = {"dt": dt, "mass_drift": m_drift, "energy_drift": e_drift}
        if label == "dt":
            c.table("diagnostics", ({"t": t, "mass": m, "energy": e}
                                    for t, m, e in zip(tr.diag_times, tr.mass, tr.energy)))
            c.fields("states", tr.states)
    order = float(np.log2(res["dt"]["energy_drift"] / res["dt_half"]["energy_drift"]))
    c.m.results.update(res)
    c.m.results["mass_drift"] = res["dt"]["mass_drift"]
    c.m.results["energy_drift"] = res["dt"]["energy_drift"]
    c.m.results["energy_order"] = order
    c.check("mass_drift", res["dt"]["mass_drift"], f"< {s['mass_tol']}",
            res["dt"]["mass_drift"] < s["mass_tol"])
    c.check("energy_drift", res["dt"]["energy_drift"], f"< {s['energy_tol']}",
            res["dt"]["energy_drift"] < s["energy_tol"])
    c.check("energy_order", order, "in [1.8, 2.2]", 1.8 <= order <= 2.2)


def _exp_picard(c: _Ctx):
    s = c.s
    f = gaussian_datum(c.grid, s["norm"])
    pr = picard_iterate(f, s["T"], c.params, k_max=s["k_max"], dt=s["dt"])
    ratios = pr.ratios[np.isfinite(pr.ratios)]
    tr = evolve(f, s["T"], c.params, s["dt"])
    gap = float(np.max(np.sqrt(np.abs(pr.limit.values - tr.values) ** 2 @ c.grid.radial_weights)))
    c.table("picard", ({"k": k, "d_k": d} for k, d in enumerate(pr.diffs)))
    c.m.results.update(diffs=pr.diffs, ratios=ratios, limit_vs_evolve=gap)
    worst = float(np.max(ratios)) if len(ratios) else 0.0
    c.check("contraction_ratios", worst, f"< {s['ratio_tol']}", worst < s["ratio_tol"])
    c.check("limit_matches_evolve", gap, f"< {s['match_tol']}", gap < s["match_tol"])


def _exp_scatter(c: _Ctx):
    s = c.s
    f = gaussian_datum(c.grid, s["norm"])
    probes = np.asarray(s["probe_times"], dtype=float)
    tr = evolve(f, float(probes.max()), c.params, s["dt"])
    rec = scattering_extract(tr, probes)
    d = rec.consecutive()
    c.table("pullback_distances", ({"t_i": probes[i], "t_j": probes[i + 1], "distance": x}
                                   for i, x in enumerate(d)))
    c.fields("pullbacks", rec.pullbacks)
    c.m.results["consecutive_distances"] = d
    c.check("distances_decreasing", d, "strictly decreasing", bool(np.all(np.diff(d) < 0)))


def _exp_lemma22(c: _Ctx):
    s = c.s
    a = c.params.alpha
    pair = BumpPair.windowed_gaussians(*s["pair"])
    rng = np.random.default_rng(s["seed"] + c.cfg.seed)
    pts = sample_admissible(pair, a, s["n_samples"], rng)

    def one(p):
        tau, xi, closed = p
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            brute = brute_force_I(pair, tau, xi, a, eps=s["eps"])
        return {"tau": tau, "xi": xi, "closed": closed, "brute": brute,
                "relerr": abs(brute - closed) / abs(closed)}

    rows = _pmap(one, pts)
    c.table("lemma22", rows, ["tau", "xi", "closed", "brute", "relerr"])
    worst = max(r["relerr"] for r in rows)
    c.m.results["max_relerr"] = worst
    c.check("oracle_equivalence", worst, f"< {s['rel_tol']}", worst < s["rel_tol"])
    xi = 1.0
    beyond = closed_form_I(pair, 1.1 * vanishing_threshold(pair, xi, a), xi, a)
    c.check("vanishing_region", beyond, "== 0", beyond == 0.0)


def _exp_bilinear(c: _Ctx):
    s, a, g = c.s, c.params.alpha, c.grid
    lams = [float(x) for x in s["lams"]]

    def one(lam):
        f = band_profile(g, lam)
        return bilinear_scan(lam, lam, s["mu"], f, f, a)

    recs = _pmap(one, lams)
    c.table("bilinear", ({"mu": r.mu, "lambda1": r.lam1, "lambda2": r.lam2, "lhs": r.lhs,
                          "rhs": r.rhs, "ratio": r.ratio} for r in recs))
    slope = loglog_slope(lams, [r.lhs for r in recs])
    c.m.results.update(slope=slope, predicted=(1 - a) / 2, sup_ratio=max(r.ratio for r in recs))
    c.check("lambda_exponent", slope, f"{(1 - a) / 2:+.3f} +- {s['slope_tol']}",
            abs(slope - (1 - a) / 2) <= s["slope_tol"])


def _exp_bernstein(c: _Ctx):
    a, g = c.params.alpha, c.grid

    def one(t):
        mu, l1, l2 = map(float, t)
        return bernstein_scan(mu, l1, l2, band_profile(g, l1), band_profile(g, l2), a)

    recs = _pmap(one, c.s["triples"])
    c.table("bernstein", ({"mu": r.mu, "lambda1": r.lam1, "lambda2": r.lam2, "lhs": r.lhs,
                           "rhs": r.rhs, "ratio": r.ratio} for r in recs))
    sup = max(r.ratio for r in recs)
    c.m.results["sup_ratio"] = sup
    c.check("ratios_finite", sup, "finite", bool(np.isfinite(sup)))


def _exp_strichartz(c: _Ctx):
    s, a, g = c.s, c.params.alpha, c.grid
    f = gaussian_datum(g, 1.0)
    rows = []
    for lam in s["lams"]:
        res = strichartz_ratio(rescale(f, float(lam), c.params), s["q"], s["r"], a)
        rows.append({"lambda": lam, "lhs": res.lhs, "rhs": res.hs_norm, "ratio": res.ratio,
                     "tail_fraction": res.tail})
    c.table("strichartz", rows)
    ratios = [r["ratio"] for r in rows]
    var = max(ratios) / min(ratios)
    c.m.results.update(variation=var, theta=res.theta)
    c.check("family_variation", var, f"< {s['variation_tol']}", var < s["variation_tol"])


def _exp_transference(c: _Ctx):
    s, a, g = c.s, c.params.alpha, c.grid
    rng = np.random.default_rng(s["seed"] + c.cfg.seed)
    win = (-s["window"], s["window"])
    lam, mu = s["lam"], s["mu"]
    pairs_single = [(random_atom(g, [lam], a, 1, win, rng), random_atom(g, [lam], a, 1, win, rng))
                    for _ in range(s["n_atoms"])]
    pairs_multi = [(random_atom(g, [lam], a, s["n_pieces"], win, rng),
                    random_atom(g, [lam], a, s["n_pieces"], win, rng))
                   for _ in range(s["n_atoms"])]
    single = _pmap(lambda p: transference_scan(p[0], p[1], mu, lam, lam), pairs_single)
    multi = _pmap(lambda p: transference_scan(p[0], p[1], mu, lam, lam), pairs_multi)
    rows = [{"kind": k, "mu": r.mu, "lambda1": r.lam1, "lambda2": r.lam2, "lhs": r.lhs,
             "rhs": r.rhs, "ratio": r.ratio}
            for k, recs in (("single", single), ("multi", multi)) for r in recs]
    c.table("transference", rows)
    ss, sm = max(r.ratio for r in single), max(r.ratio for r in multi)
    factor = max(sm / ss, ss / sm)
    c.m.results.update(single_sup=ss, multi_sup=sm, factor=factor)
    c.check("multi_vs_single_sup", factor, f"< {s['factor_tol']}", factor < s["factor_tol"])


def _exp_sumbil(c: _Ctx):
    s, a, g = c.s, c.params.alpha, c.grid
    rng = np.random.default_rng(s["seed"] + c.cfg.seed)
    win = (-s["window"], s["window"])
    u = random_atom(g, s["bands"], a, s["n_pieces"], win, rng)
    v = random_atom(g, s["bands"], a, s["n_pieces"], win, rng)
    r2 = sum_bilinear_check(u, v)
    far = [s["far_band"]]
    u3 = u + random_atom(g, far, a, s["n_pieces"], win, rng) * s["far_amplitude"]
    v3 = v + random_atom(g, far, a, s["n_pieces"], win, rng) * s["far_amplitude"]
    r3 = sum_bilinear_check(u3, v3)
    c.table("sumbil", [{"bands": "two", "lhs": r2.lhs, "rhs": r2.rhs, "ratio": r2.ratio},
                       {"bands": "three", "lhs": r3.lhs, "rhs": r3.rhs, "ratio": r3.ratio}])
    stab = max(r2.ratio / r3.ratio, r3.ratio / r2.ratio)
    c.m.results.update(ratio_two=r2.ratio, ratio_three=r3.ratio, stability=stab)
    c.check("ratio_finite", r2.ratio, "finite and > 0", np.isfinite(r2.ratio) and r2.ratio > 0)
    c.check("far_band_stability", stab, f"< {s['stability_tol']}", stab < s["stability_tol"])


def _exp_illposed(c: _Ctx):
    s, a = c.s, c.params.alpha
    rec = growth_experiment(s["lams"], s["s"], a, s["eps"], grid=c.grid)
    c.table("growth", rec.rows(), ["lambda", "norm_phi", "norm_Phi", "ratio", "T"])
    sl = rec.slopes()
    c.m.results["slopes"] = sl
    c.m.results["max_leakage"] = float(rec.leakage.max())
    lam0 = float(rec.lams[-1])
    ph = phase_smallness(lam0, s["eps"] * lam0**-a, a)
    c.m.results["phase_max"] = ph
    for key, tol in (("norm_phi", 0.03), ("norm_Phi", 0.15), ("ratio", 0.1)):
        c.check(f"slope_{key}", sl[key], f"{sl['predicted_' + key]:+.3f} +- {tol}",
                abs(sl[key] - sl["predicted_" + key]) <= tol)
    c.check("phase_smallness", ph, f"< {10 * s['eps']}", ph < 10 * s["eps"])
    c.check("support_leakage", rec.leakage.max(), "< 1e-6", rec.leakage.max() < 1e-6)


def _exp_localtime(c: _Ctx):
    s, a = c.s, c.params.alpha
    Ls = [float(x) for x in s["Lambdas"]]
    res = _pmap(lambda L: local_time_probe(s["r"], L, c.params, grid=c.grid,
                                           n_steps=s["n_steps"], bisections=s["bisections"]), Ls)
    c.table("local_time", ({"r": x.r, "Lambda": x.Lambda, "T_star": x.T_star,
                            "bracket_maximal": x.bracket_maximal} for x in res))
    if any(x.bracket_maximal for x in res):
        c.m.results["note"] = "bracket-maximal T*: no nonlinear obstruction found"
        c.check("slope_Lambda", None, "requires interior T*", c.params.sigma == 0)
        return
    slope = loglog_slope(Ls, [x.T_star for x in res])
    c.m.results["slope"] = slope
    c.check("slope_Lambda", slope, f"{-a:+.3f} +- {s['slope_tol']}",
            abs(slope + a) <= s["slope_tol"])


_RUNNERS = {name: globals()[f"_exp_{name}"] for name in EXPERIMENTS}


def run(cfg: RunConfig) -> RunManifest:
    """Execute ``cfg`` and write its run directory; never raises on numerical failure."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    m = RunManifest(cfg.echo(), __version__)
    ctx = _Ctx(cfg, m)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.experiment](ctx)
        m.status = "passed" if all(ch.passed for ch in m.checks) else "failed"
    except Exception as exc:  # numerical guards surface here
        m.status = "failed"
        m.error = f"{type(exc).__name__}: {exc}"
        m.results["traceback"] = traceback.format_exc(limit=4)
    m.wall_clock = time.perf_counter() - t0
    write_json(cfg.output_dir / "manifest.json", m.as_dict())
    return m


# -- manifest comparison --------------------------------------------------------------

def _flatten(x, prefix=""):
    if isinstance(x, dict):
        for k, v in x.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(x, list) and all(isinstance(v, (int, float)) for v in x):
        for i, v in enumerate(x):
            yield f"{prefix}[{i}]", v
    elif isinstance(x, (int, float)) and not isinstance(x, bool):
        yield prefix, float(x)


def compare(manifest_a, manifest_b, rtol: float = 1e-9, tolerances: dict | None = None) -> dict:
    """Relative differences of every numeric result and check value.

    ``tolerances`` maps field names to their own drift tolerance.  Returns
    {field: {"a", "b", "rel_diff", "ratio", "flagged"}} for fields that differ.
    """
    a = manifest_a if isinstance(manifest_a, dict) else read_json(manifest_a)
    b = manifest_b if isinstance(manifest_b, dict) else read_json(manifest_b)
    if a["config"]["experiment"] != b["config"]["experiment"]:
        raise ValueError("manifests come from different experiments")
    tolerances = tolerances or {}

    def numbers(m):
        out = dict(_flatten(m.get("results", {}), "results"))
        for ch in m.get("checks", []):
            out.update(_flatten({ch["name"]: ch["value"]}, "checks"))
        return out

    na, nb = numbers(a), numbers(b)
    diff = {}
    for key in sorted(set(na) | set(nb)):
        va, vb = na.get(key), nb.get(key)
        if va is None or vb is None:
            diff[key] = {"a": va, "b": vb, "rel_diff": None, "ratio": None, "flagged": True}
            continue
        if va == vb:
            continue
        rel = abs(va - vb) / max(abs(va), abs(vb))
        tol = tolerances.get(key, rtol)
        diff[key] = {"a": va, "b": vb, "rel_diff": rel,
                     "ratio": va / vb if vb != 0 else None, "flagged": rel > tol}
    return diff


# -- command line ---------------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fracthartree",
                                 description="Run a configured experiment or compare manifests.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the experiment described by a YAML config")
    r.add_argument("config")
    r.add_argument("--output", "-o", default=None, help="override output_dir")
    cp = sub.add_parser("compare", help="diff two manifests of the same experiment")
    cp.add_argument("manifest_a")
    cp.add_argument("manifest_b")
    cp.add_argument("--rtol", type=float, default=1e-9)
    args = ap.parse_args(argv)

    if args.cmd == "compare":
        try:
            d = compare(args.manifest_a, args.manifest_b, args.rtol)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for k, v in d.items():
            print(f"{'!' if v['flagged'] else ' '} {k}: {v['a']} -> {v['b']} (rel {v['rel_diff']})")
        return EXIT_NUMERICAL if any(v["flagged"] for v in d.values()) else EXIT_PASS

    try:
        cfg = load_config(args.config, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    m = run(cfg)
    for ch in m.checks:
        print(f"{'PASS' if ch.passed else 'FAIL'}  {ch.name}: {ch.value} ({ch.criterion})")
    if m.error:
        print(f"error: {m.error}", file=sys.stderr)
    print(f"{cfg.experiment}: {m.status} in {m.wall_clock:.1f}s -> {cfg.output_dir}")
    return EXIT_PASS if m.passed else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
