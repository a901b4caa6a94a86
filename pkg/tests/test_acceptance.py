"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines appear in
the output even without ``-s``.
"""

import warnings

import numpy as np
import pytest

from fracthartree.estimates import (BumpPair, NonConvergenceWarning, StepAtom, band_profile,
                                    bilinear_scan_leq, brute_force_I, random_atom,
                                    sample_admissible, strichartz_theta, v2_norm_enumerate,
                                    v2_norm_exact, vanishing_threshold)
from fracthartree.runner import parse_config, run
from fracthartree.spectral import RadialGrid, l2_norm

pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def report(number, title, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")
        assert passed, detail
    return report


def run_experiment(tmp_path, text):
    m = run(parse_config(text, output_override=tmp_path / "run"))
    if m.error:
        raise AssertionError(m.error)
    return m


def check(m, name):
    return next(c for c in m.checks if c.name == name)


# 1 ----------------------------------------------------------------------------------

PAIRS = [(2.0, 0.3, 1.0, 0.2), (1.5, 0.3, 1.5, 0.3), (1.5, 0.5, 1.2, 0.5)]


def test_delta_integral_oracle_equivalence(verdict):
    rng = np.random.default_rng(2026)
    worst, worst_leak, n = 0.0, 0.0, 0
    for widths in PAIRS:
        pair = BumpPair.windowed_gaussians(*widths)
        for alpha in (1.0, 1.5, 2.0):
            pts = sample_admissible(pair, alpha, 20, rng)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                for tau, xi, closed in pts:
                    worst = max(worst, abs(brute_force_I(pair, tau, xi, alpha) - closed) / closed)
                    n += 1
                peak = max(p[2] for p in pts)
                xi = float(np.median([p[1] for p in pts]))
                beyond = brute_force_I(pair, 1.1 * vanishing_threshold(pair, xi, alpha), xi, alpha)
            worst_leak = max(worst_leak, abs(beyond) / peak)
    verdict(1, "delta-integral closed form vs brute force",
            n >= 180 and worst < 0.01 and worst_leak < 1e-3,
            f"{n} points, max relerr {worst:.2e} (< 1e-2), vanishing leakage {worst_leak:.2e} "
            f"of peak (< 1e-3)")


# 2 ----------------------------------------------------------------------------------

def test_bilinear_lambda_exponent(tmp_path, verdict):
    parts, ok = [], True
    for alpha in (1.0, 1.25, 1.5, 2.0):
        m = run_experiment(tmp_path / str(alpha),
                           f"experiment: bilinear\nparams: {{alpha: {alpha}}}\n"
                           "grid: {n_points: 16384, r_max: 64.0}\n"
                           "settings: {mu: 1.0, lams: [8, 16, 32, 64], slope_tol: 0.1}\n")
        slope, want = m.results["slope"], (1 - alpha) / 2
        ok &= abs(slope - want) <= 0.1
        parts.append(f"a={alpha}: {slope:+.3f} vs {want:+.3f}")
    verdict(2, "bilinear lambda exponent (1 - alpha)/2 +- 0.1", ok, "; ".join(parts))


# 3 ----------------------------------------------------------------------------------

def _bounded_scan(grid, alpha=1.5):
    levels = [2.0**k for k in (-3, -1, 1, 3, 5, 7)]
    ratios = []
    for lam1 in levels:
        f1 = band_profile(grid, lam1)
        for lam2 in (lam1, lam1 / 4):
            if lam2 < levels[0]:
                continue
            f2 = band_profile(grid, lam2)
            for mu in levels:
                if mu > 4 * lam1 or (lam2 != lam1 and mu < lam1):
                    continue
                ratios.append(bilinear_scan_leq(mu, lam1, lam2, f1, f2, alpha).ratio)
    return np.array(ratios)


def test_low_frequency_bilinear_bound_stable_under_refinement(verdict):
    coarse = _bounded_scan(RadialGrid(32768, 128.0))
    fine = _bounded_scan(RadialGrid(65536, 128.0))
    sc, sf = coarse.max(), fine.max()
    var = max(sc / sf, sf / sc)
    ok = np.all(np.isfinite(coarse)) and np.all(np.isfinite(fine)) and var < 2
    verdict(3, "sup ratio over 3-decade (mu, lambda) scan",
            ok, f"{len(coarse)} triples, sup {sc:.4f} -> {sf:.4f} under x2 refinement, "
                f"variation {var:.4f} (< 2)")


# 4 ----------------------------------------------------------------------------------

def test_transference_atoms(tmp_path, verdict):
    m = run_experiment(tmp_path, "experiment: transference\n"
                                 "settings: {n_atoms: 50, n_pieces: 4, lam: 8.0, mu: 1.0}\n")
    r = m.results
    verdict(4, "4-piece atom sup ratio within 4x of single-piece", r["factor"] < 4,
            f"single {r['single_sup']:.4f}, multi {r['multi_sup']:.4f}, factor {r['factor']:.3f}")


# 5 ----------------------------------------------------------------------------------

def test_strichartz_family(tmp_path, verdict):
    parts, ok = [], True
    for alpha in (1.5, 2.0):
        m = run_experiment(tmp_path / str(alpha),
                           f"experiment: strichartz\nparams: {{alpha: {alpha}}}\n"
                           "settings: {q: 4.0, r: 3.0, lams: [1, 2, 4, 8]}\n")
        theta, want = m.results["theta"], 1.5 * (2 - alpha) * (0.5 - 1 / 3)
        var = m.results["variation"]
        ok &= var < 2 and abs(theta - want) < 1e-15
        parts.append(f"a={alpha}: theta {theta:.4f}, variation {var:.4f}")
    ok &= strichartz_theta(3, 2.0) == 0.0
    verdict(5, "Strichartz ratio over rescaled family (q, r) = (4, 3)", ok,
            "; ".join(parts) + "; theta(alpha=2) == 0 exactly")


# 6 ----------------------------------------------------------------------------------

def test_conservation(tmp_path, verdict):
    parts, ok = [], True
    for sigma in (1.0, -1.0):
        m = run_experiment(tmp_path / str(sigma),
                           f"experiment: evolve\nparams: {{alpha: 1.5, sigma: {sigma}}}\n")
        mass, order = m.results["mass_drift"], m.results["energy_order"]
        ok &= mass < 1e-8 and 1.8 <= order <= 2.2
        parts.append(f"sigma={sigma:+.0f}: mass drift {mass:.1e}, energy order {order:.3f}")
    verdict(6, "mass drift < 1e-8 and energy order in [1.8, 2.2]", ok, "; ".join(parts))


# 7 ----------------------------------------------------------------------------------

def test_small_data_contraction(tmp_path, verdict):
    m = run_experiment(tmp_path, "experiment: picard\nparams: {alpha: 1.5}\n"
                                 "settings: {norm: 0.05, T: 5.0}\n")
    ratio, match = check(m, "contraction_ratios"), check(m, "limit_matches_evolve")
    verdict(7, "Picard contraction and match with splitting", ratio.passed and match.passed,
            f"max d_(k+1)/d_k {ratio.value:.3e} ({ratio.criterion}), "
            f"limit vs evolve {match.value:.2e} ({match.criterion})")


# 8 ----------------------------------------------------------------------------------

def test_scattering(tmp_path, verdict):
    m = run_experiment(tmp_path, "experiment: scatter\n"
                                 "settings: {probe_times: [10.0, 20.0, 40.0]}\n")
    d = np.asarray(m.results["consecutive_distances"])
    verdict(8, "pullback distances at t = 10, 20, 40 decreasing", bool(np.all(np.diff(d) < 0)),
            f"distances {np.array2string(d, precision=3)}")


# 9 ----------------------------------------------------------------------------------

def test_local_time_scaling(tmp_path, verdict):
    m = run_experiment(tmp_path, "experiment: localtime\nparams: {alpha: 1.5}\n"
                                 "settings: {r: 2.0, Lambdas: [2, 4, 8, 16]}\n")
    slope = m.results.get("slope", float("nan"))
    verdict(9, "T* vs Lambda slope = -alpha +- 0.2", abs(slope + 1.5) <= 0.2,
            f"slope {slope:+.4f} (alpha = 1.5)")


# 10 ---------------------------------------------------------------------------------

def test_illposedness_exponents(tmp_path, verdict):
    parts, ok = [], True
    for s in (-0.25, 0.0, 0.5):
        m = run_experiment(tmp_path / str(s), f"experiment: illposed\nsettings: {{s: {s}}}\n")
        sl = m.results["slopes"]
        ok &= (abs(sl["norm_phi"] - (s + 1.5)) <= 0.03 and abs(sl["norm_Phi"] - (s + 4.5)) <= 0.15
               and abs(sl["ratio"] + 2 * s) <= 0.1)
        # growth means a ratio slope beyond the fit tolerance
        ok &= (sl["ratio"] > 0.1) == (s < 0)
        parts.append(f"s={s:+.2f}: {sl['norm_phi']:.3f}/{sl['norm_Phi']:.3f}/{sl['ratio']:+.3f}")
    verdict(10, "ill-posedness slopes datum/cubic/ratio", ok, "; ".join(parts))


# 11 ---------------------------------------------------------------------------------

def test_v2_norm_on_step_atoms(verdict):
    g = RadialGrid(256, 16.0)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        a = random_atom(g, [2], 1.5, int(rng.integers(1, 6)), (-1, 1), rng)
        b = random_atom(g, [4], 1.5, int(rng.integers(1, 6)), (-0.5, 1.5), rng)
        c = complex(rng.normal(), rng.normal())
        na, nb = v2_norm_exact(a), v2_norm_exact(b)
        worst = max(worst,
                    max(0.0, v2_norm_exact(a + b) - na - nb),
                    abs(v2_norm_exact(a * c) - abs(c) * na) / (abs(c) * na),
                    abs(na - v2_norm_enumerate(a)) / na)
    zero = v2_norm_exact(StepAtom([0.0, 1.0], [g.zeros()], 1.5))
    phi = band_profile(g, 2) * 0.7
    single = v2_norm_exact(StepAtom([0.0, 3.0], [phi], 1.5))
    err = abs(single - np.sqrt(2) * l2_norm(phi)) / l2_norm(phi)
    verdict(11, "V^2 norm axioms and single-piece value", worst < 1e-9 and zero == 0 and err < 1e-14,
            f"axiom violation {worst:.1e} (< 1e-9), single piece / (sqrt2 ||phi||) - 1 = {err:.1e}")
