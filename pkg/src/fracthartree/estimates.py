"""Numerical checks of the radial bilinear and Strichartz estimates.

Space-time norms are computed on a uniform time mesh whose step resolves the
temporal frequency support of the product (|tau| <= alpha max^(alpha-1) |xi|),
with the radial grid handling space.  Beyond the window the squared spatial
norm is extrapolated by dispersive decay ~ |t|^-2.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .dynamics import Trajectory, free_propagate
from .littlewood_paley import DyadicIndex, build_bump, resolvable_range
from .spectral import (RadialField, RadialGrid, SpectralField, forward_transform,
                       inverse_transform, sobolev_norm)

__all__ = [
    "BumpPair",
    "DyadicRecord",
    "DyadicReport",
    "StepAtom",
    "NonConvergenceWarning",
    "omega",
    "lower_limit",
    "exact_lower_limit",
    "vanishing_threshold",
    "closed_form_I",
    "brute_force_I",
    "sample_admissible",
    "band_profile",
    "bilinear_scan",
    "bilinear_scan_leq",
    "bernstein_scan",
    "strichartz_theta",
    "strichartz_ratio",
    "v2_norm_exact",
    "v2_norm_enumerate",
    "v2_norm_lower",
    "transference_scan",
    "random_atom",
    "sum_bilinear_check",
    "sum_bilinear_decomposition",
    "x_norm_proxy",
    "loglog_slope",
]

_BUMP = build_bump()


class NonConvergenceWarning(RuntimeWarning):
    pass


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# -- the delta integral ----------------------------------------------------------

@dataclass(frozen=True)
class BumpPair:
    """Radial profiles phi (at |eta|) and psi (at |xi - eta|) with compact support."""

    phi: object
    psi: object
    r_supp: float
    R_supp: float
    description: str = ""
    phi_lo: float = 0.0
    psi_lo: float = 0.0

    @classmethod
    def windowed_gaussians(cls, c1, w1, c2, w2, halfwidth1=None, halfwidth2=None):
        """Gaussians at c1, c2 multiplied by smooth windows c +- halfwidth."""
        h1 = halfwidth1 or 4 * w1
        h2 = halfwidth2 or 4 * w2

        def make(c, w, h):
            def f(x):
                x = np.asarray(x, dtype=float)
                return np.exp(-0.5 * ((x - c) / w) ** 2) * _BUMP.cutoff(2 * (x - c) / h)
            return f

        lo1, lo2 = max(c1 - h1, 0.0), max(c2 - h2, 0.0)
        return cls(make(c1, w1, h1), make(c2, w2, h2), c1 + h1, c2 + h2,
                   f"gauss({c1},{w1})x gauss({c2},{w2})", lo1, lo2)

    @classmethod
    def zero(cls):
        z = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
        return cls(z, z, 1.0, 1.0, "zero", 0.0, 0.0)


def omega(tau, rho, alpha):
    """(rho^alpha - tau)^(1/alpha)."""
    return np.power(np.maximum(np.power(rho, alpha) - tau, 0.0), 1.0 / alpha)


def lower_limit(tau, xi, alpha):
    """a(tau, |xi|) = (|xi|^2 + tau^(2/alpha)) / (2 |xi|)."""
    return (xi**2 + tau ** (2.0 / alpha)) / (2.0 * xi)


def exact_lower_limit(tau, xi, alpha) -> float:
    """Smallest rho with omega(tau, rho) >= |rho - |xi||.

    This is where the angular root of the delta enters [-1, 1]; it agrees with
    ``lower_limit`` for alpha = 2 and exceeds it for alpha < 2.
    """
    start = tau ** (1.0 / alpha)

    def h(rho):
        return omega(tau, rho, alpha) - abs(rho - xi)

    if h(start) >= 0:
        return float(start)
    hi = max(2 * start, xi, 1.0)
    while h(hi) < 0:
        hi *= 2
        if hi > 1e12:
            return np.inf
    return float(optimize.brentq(h, start, hi, xtol=1e-14, rtol=1e-14))


def vanishing_threshold(pair: BumpPair, xi, alpha) -> float:
    return alpha * max(pair.r_supp, pair.R_supp) ** (alpha - 1.0) * xi


def closed_form_I(pair: BumpPair, tau: float, xi_mag: float, alpha: float,
                  limit: str = "exact") -> float:
    """(2 pi / (alpha |xi|)) int phi(rho) psi(omega) omega^(2-alpha) rho drho.

    ``limit="exact"`` integrates over rho >= exact_lower_limit (the true
    support of the delta); ``limit="naive"`` starts at a(tau, |xi|), which for
    alpha < 2 may include rho where the delta has no root.
    """
    if tau < 0:
        raise ValueError("tau < 0: use the swap symmetry I(phi, psi)(-tau) form")
    if xi_mag <= 0:
        raise ValueError("|xi| must be positive")
    if not 1.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [1, 2]")
    if tau > vanishing_threshold(pair, xi_mag, alpha):
        return 0.0
    if limit == "exact":
        a = exact_lower_limit(tau, xi_mag, alpha)
    elif limit == "naive":
        a = lower_limit(tau, xi_mag, alpha)
    else:
        raise ValueError(f"unknown limit {limit!r}")
    lo = max(a, pair.phi_lo, tau ** (1 / alpha))
    hi = pair.r_supp
    if lo >= hi:
        return 0.0

    def integrand(rho):
        w = omega(tau, rho, alpha)
        return pair.phi(rho) * pair.psi(w) * w ** (2 - alpha) * rho

    val, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=0.0, epsrel=1e-10)
    return float(2 * np.pi / (alpha * xi_mag) * val)


def sample_admissible(pair: BumpPair, alpha: float, n: int, rng, peak_frac: float = 1e-2,
                      n_probe: int = 400) -> list:
    """Random (tau, |xi|, I) with I >= peak_frac * (estimated peak of I).

    Candidates come from configurations |eta| in supp phi, |xi - eta| in supp psi
    with |xi - eta| <= |eta|, which is where tau >= 0 and I can be nonzero.
    """

    def draw():
        while True:
            rho = rng.uniform(pair.phi_lo, pair.r_supp)
            s = rng.uniform(pair.psi_lo, pair.R_supp)
            if s <= rho:
                break
        xi = rng.uniform(max(rho - s, 1e-3), rho + s)
        tau = rho**alpha - s**alpha
        return tau, xi, closed_form_I(pair, tau, xi, alpha)

    peak = max(draw()[2] for _ in range(n_probe))
    if peak <= 0:
        raise ValueError("the delta integral vanishes on every probe")
    out = []
    for _ in range(1000 * n):
        p = draw()
        if p[2] >= peak_frac * peak:
            out.append(p)
            if len(out) == n:
                return out
    raise RuntimeError("could not sample enough admissible points")


def _mollified_I(pair, tau, xi, alpha, eps, n_rho, n_b):
    # 2D (rho, b) trapezoid of 2 pi rho^2 phi(rho) psi(s) G_eps(tau - rho^a + s^a)
    rho = np.linspace(pair.phi_lo, pair.r_supp, n_rho)
    ph = pair.phi(rho)
    keep = ph != 0
    rho, ph = rho[keep], ph[keep]
    drho = (pair.r_supp - pair.phi_lo) / (n_rho - 1)
    b = np.linspace(-1.0, 1.0, n_b)
    wb = np.full(n_b, 2.0 / (n_b - 1))
    wb[[0, -1]] *= 0.5
    total = 0.0
    norm = 1.0 / (np.sqrt(2 * np.pi) * eps)
    for s in range(0, len(rho), 64):
        r = rho[s:s + 64, None]
        sq = np.maximum(xi**2 + r**2 - 2 * xi * r * b[None, :], 0.0)
        sd = np.sqrt(sq)
        arg = (tau - r**alpha + sd**alpha) / eps
        kern = norm * np.exp(-0.5 * arg**2) * pair.psi(sd)
        total += np.sum((2 * np.pi * r[:, 0] ** 2 * ph[s:s + 64]) * (kern @ wb))
    return total * drho


def brute_force_I(pair: BumpPair, tau: float, xi_mag: float, alpha: float,
                  eps: float = 0.01, cells_per_eps: float = 0.5, max_points: int = 2400,
                  extrapolate: bool = True, rtol: float = 5e-3, max_halvings: int = 4) -> float:
    """Mollified-delta quadrature of the 3D delta integral, reduced to (rho, b).

    The delta is replaced by a unit Gaussian of width eps; the grid is sized so
    that a cell spans about eps / (2 ``cells_per_eps``) of phase at the
    worst-case gradient (a loose bound, so the default is coarse); a grid
    self-check on a 2/3-size grid warns when quadrature is not converged.
    While I(eps) and I(eps/2) differ by more than ``rtol`` the width is halved,
    at most ``max_halvings`` times (near-degenerate level sets need this), and a
    warning is issued if they still disagree.  Returns the Richardson
    extrapolation (4 I(eps/2) - I(eps)) / 3 unless ``extrapolate`` is False.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    # bound the phase gradient on the support to size the grid
    rho = np.linspace(max(pair.phi_lo, 1e-9), pair.r_supp, 200)[:, None]
    b = np.linspace(-1, 1, 401)[None, :]
    s = np.sqrt(np.maximum(xi_mag**2 + rho**2 - 2 * xi_mag * rho * b, 1e-300))
    live = (pair.phi(rho) != 0) & (pair.psi(s) != 0)
    if not np.any(live):
        return 0.0
    smin = max(float(np.min(s[live])), 1e-6)
    g_b = alpha * xi_mag * pair.r_supp * smin ** (alpha - 2)
    g_r = alpha * (pair.r_supp ** (alpha - 1) + smin ** (alpha - 2) * (pair.r_supp + xi_mag))
    for level in range(max_halvings + 1):
        step = 0.5 * eps / cells_per_eps
        n_b = int(min(max_points, np.ceil(2 * g_b / step) + 1))
        n_rho = int(min(max_points, np.ceil((pair.r_supp - pair.phi_lo) * g_r / step) + 1))
        i1 = _mollified_I(pair, tau, xi_mag, alpha, eps, n_rho, n_b)
        i2 = _mollified_I(pair, tau, xi_mag, alpha, eps / 2, n_rho, n_b)
        scale = max(abs(i1), abs(i2))
        if scale == 0 or abs(i1 - i2) <= rtol * scale or level == max_halvings:
            break
        eps /= 2
    # quadrature self-check on a coarser grid at the finest width
    i2c = _mollified_I(pair, tau, xi_mag, alpha, eps / 2, 2 * n_rho // 3 + 2, 2 * n_b // 3 + 2)
    if scale > 0 and abs(i2 - i2c) > 1e-3 * scale:
        warnings.warn(f"(rho, b) grid under-resolved: coarse/fine differ by "
                      f"{abs(i2 - i2c) / scale:.2%}", NonConvergenceWarning, stacklevel=2)
    if scale > 0 and abs(i1 - i2) > rtol * scale:
        warnings.warn(f"eps-refinement changed the value by {abs(i1 - i2) / scale:.2%} "
                      f"at eps = {eps:.3g}", NonConvergenceWarning, stacklevel=2)
    return float((4 * i2 - i1) / 3 if extrapolate else i2)


# -- dyadic reports ----------------------------------------------------------------

@dataclass
class DyadicRecord:
    mu: float
    lam1: float
    lam2: float
    lhs: float
    rhs: float
    ratio: float
    extra: dict = field(default_factory=dict)


@dataclass
class DyadicReport:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, rec: DyadicRecord):
        self.records.append(rec)
        return rec

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.records])

    def sup_ratio(self) -> float:
        return float(np.max(self.ratios))

    def rows(self):
        for r in self.records:
            yield {"mu": r.mu, "lambda1": r.lam1, "lambda2": r.lam2,
                   "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio}


def _record(mu, lam1, lam2, lhs, rhs, **extra) -> DyadicRecord:
    if lhs < 0 or rhs < 0:
        raise ValueError("norms must be nonnegative")
    ratio = lhs / rhs if rhs > 0 else 0.0
    return DyadicRecord(float(mu), float(lam1), float(lam2), float(lhs), float(rhs),
                        float(ratio), extra)


def band_profile(grid: RadialGrid, lam: float, kind: str = "gaussian",
                 phase: float = 0.0) -> RadialField:
    """Unit-L^2 radial datum with spectrum inside the dyadic band of ``lam``."""
    rho = grid.rho
    if kind == "gaussian":
        F = np.exp(-0.5 * ((rho - 1.25 * lam) / (0.25 * lam)) ** 2)
        F = F * _BUMP.chi_lam(rho, lam) if lam > 0 else F
    elif kind == "flat":
        F = _BUMP.chi_lam(rho, lam)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    F = F * np.exp(1j * phase)
    F = F / np.sqrt(np.abs(F) ** 2 @ grid.spectral_weights)
    return inverse_transform(SpectralField(grid, F))


def _aliasing_guard(grid, lam_max):
    if not 2 * lam_max < grid.rho_max / 2:
        raise ValueError(f"aliasing guard: 2 * {lam_max} >= rho_max / 2 = {grid.rho_max / 2:.4g}")


def _default_window(alpha, lam, mu, factor=8.0):
    return factor / (alpha * lam ** (alpha - 1.0) * mu)


def _time_mesh(T_lo, T_hi, tau_max, oversample=4.0, min_steps=16):
    # trapezoid is exact for |.|^2 band-limited to 2 tau_max when dt < pi / tau_max
    dt = np.pi / (oversample * tau_max)
    n = max(min_steps, int(np.ceil((T_hi - T_lo) / dt)))
    return np.linspace(T_lo, T_hi, n + 1)


def _box_guard(grid, alpha, lam_max, T, what="window"):
    v = alpha * (2 * lam_max) ** (alpha - 1.0)
    if v * T > 0.85 * grid.r_max:
        raise ValueError(f"{what} too long for the box: waves travel {v * T:.3g} "
                         f"> 0.85 r_max = {0.85 * grid.r_max:.3g}")


def _spectral_flow(F, grid, alpha, times, sign=1):
    ph = np.exp(-1j * sign * np.outer(times, grid.rho**alpha))
    return inverse_transform(SpectralField(grid, F[None, :] * ph)).values


def _spacetime_sq(prod: np.ndarray, grid, mult, times, chunk=None):
    """Per-time squared L^2_x norms of mult * F[prod]."""
    F = forward_transform(RadialField(grid, prod)).values
    return (np.abs(F * mult) ** 2) @ grid.spectral_weights


def _trapezoid(y, t):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def _integrate_with_tail(q: np.ndarray, times: np.ndarray, tail: bool = True):
    body = _trapezoid(q, times)
    if not tail:
        return body, 0.0
    # |t|^-2 decay beyond the window on both sides
    tl = q[0] * abs(times[0]) if times[0] < 0 else 0.0
    tr = q[-1] * abs(times[-1]) if times[-1] > 0 else 0.0
    return body + tl + tr, tl + tr


def _bilinear_core(f, g, lam1, lam2, alpha, mult, tau_max, T_window, conj_second,
                   chunk=128, tail=True):
    grid = f.grid
    times = _time_mesh(-T_window, T_window, tau_max)
    F1 = _BUMP.chi_lam(grid.rho, lam1) * forward_transform(f).values
    F2 = _BUMP.chi_lam(grid.rho, lam2) * forward_transform(g).values
    q = np.empty(len(times))
    for s in range(0, len(times), chunk):
        t = times[s:s + chunk]
        u = _spectral_flow(F1, grid, alpha, t, +1)
        if conj_second:
            v = np.conj(_spectral_flow(F2, grid, alpha, t, +1))
        else:
            v = _spectral_flow(F2, grid, alpha, t, -1)
        q[s:s + chunk] = _spacetime_sq(u * v, grid, mult, t)
    total, tail_part = _integrate_with_tail(q, times, tail)
    n1 = np.sqrt(np.abs(F1) ** 2 @ grid.spectral_weights)
    n2 = np.sqrt(np.abs(F2) ** 2 @ grid.spectral_weights)
    return np.sqrt(total), n1, n2, {"tail_fraction": tail_part / total if total > 0 else 0.0,
                                    "T_window": T_window, "n_times": len(times)}


def bilinear_scan(lam1, lam2, mu, f: RadialField, g: RadialField, alpha: float,
                  T_window: float | None = None, window_factor: float = 8.0) -> DyadicRecord:
    """|| P_mu (S(t) P_lam1 f  *  S(-t) P_lam2 g) ||_{L^2_{t,x}} against
    mu lam2^((1-alpha)/2) ||P_lam1 f|| ||P_lam2 g||."""
    lam1, lam2, mu = (DyadicIndex.of(x).value for x in (lam1, lam2, mu))
    if lam1 < lam2:
        raise ValueError("need lam1 >= lam2")
    grid = f.grid
    _aliasing_guard(grid, lam1)
    T_window = T_window or _default_window(alpha, lam2, mu, window_factor)
    _box_guard(grid, alpha, lam1, T_window)
    tau_max = alpha * (2 * lam1) ** (alpha - 1) * 2 * mu
    mult = _BUMP.chi_lam(grid.rho, mu)
    lhs, n1, n2, extra = _bilinear_core(f, g, lam1, lam2, alpha, mult, tau_max, T_window,
                                        conj_second=False)
    rhs = mu * lam2 ** ((1 - alpha) / 2) * n1 * n2
    return _record(mu, lam1, lam2, lhs, rhs, **extra)


def bilinear_constant(mu, lam1, alpha):
    """mu^((3-alpha)/2) (mu/lam1)^((alpha-1)/2)."""
    return mu ** ((3 - alpha) / 2) * (mu / lam1) ** ((alpha - 1) / 2)


def bilinear_scan_leq(mu, lam1, lam2, f: RadialField, g: RadialField, alpha: float,
                      T_window: float | None = None, window_factor: float = 8.0) -> DyadicRecord:
    """|| P_{<=mu} (P_lam1 S(t) f  conj(P_lam2 S(t) g)) ||_{L^2_{t,x}}."""
    lam1, lam2, mu = (DyadicIndex.of(x).value for x in (lam1, lam2, mu))
    grid = f.grid
    lam_hi = max(lam1, lam2)
    _aliasing_guard(grid, lam_hi)
    T_window = T_window or _default_window(alpha, min(lam1, lam2), mu, window_factor)
    _box_guard(grid, alpha, lam_hi, T_window)
    tau_max = alpha * (2 * lam_hi) ** (alpha - 1) * 2 * mu
    mult = _BUMP.chi_leq(grid.rho, mu)
    lhs, n1, n2, extra = _bilinear_core(f, g, lam1, lam2, alpha, mult, tau_max, T_window,
                                        conj_second=True)
    rhs = bilinear_constant(mu, lam1, alpha) * n1 * n2
    return _record(mu, lam1, lam2, lhs, rhs, **extra)


def bernstein_scan(mu, lam1, lam2, f: RadialField, g: RadialField, alpha: float,
                   T_window: float | None = None, window_factor: float = 8.0) -> DyadicRecord:
    """|| P_mu (P_lam1 S(t) f  conj(P_lam2 S(t) g)) || against
    min(mu, lam1, lam2)^(1/2) (lam1 lam2)^((2-alpha)/4) ||P_lam1 f|| ||P_lam2 g||."""
    lam1, lam2, mu = (DyadicIndex.of(x).value for x in (lam1, lam2, mu))
    grid = f.grid
    lam_hi, lam_lo = max(lam1, lam2), min(lam1, lam2)
    _aliasing_guard(grid, lam_hi)
    T_window = T_window or _default_window(alpha, lam_lo, mu, window_factor)
    _box_guard(grid, alpha, lam_hi, T_window)
    tau_max = alpha * (2 * lam_hi) ** (alpha - 1) * 2 * mu
    mult = _BUMP.chi_lam(grid.rho, mu)
    lhs, n1, n2, extra = _bilinear_core(f, g, lam1, lam2, alpha, mult, tau_max, T_window,
                                        conj_second=True)
    rhs = min(mu, lam1, lam2) ** 0.5 * (lam1 * lam2) ** ((2 - alpha) / 4) * n1 * n2
    return _record(mu, lam1, lam2, lhs, rhs, **extra)


# -- Strichartz ----------------------------------------------------------------------

def strichartz_theta(r: float, alpha: float, n: int = 3) -> float:
    """Derivative loss (n/2)(2 - alpha)(1/2 - 1/r)."""
    return n / 2 * (2 - alpha) * (0.5 - 1.0 / r)


@dataclass
class StrichartzResult:
    ratio: float
    lhs: float
    hs_norm: float
    theta: float
    tail: float
    decay_exponent: float
    zero_input: bool = False


def strichartz_ratio(f: RadialField, q: float, r: float, alpha: float,
                     T_window: float | None = None, n_times: int = 801) -> StrichartzResult:
    """||S(t) f||_{L^q_t L^r_x} / ||f||_{H^theta} on [-T, T] plus a decay tail.

    The tail assumes ||S(t) f||_{L^r} ~ |t|^-p with p fitted on the outer
    quarter of the window.
    """
    if not (q > 2 and r >= 2 and abs(2 / q + 3 / r - 1.5) < 1e-12):
        raise ValueError(f"(q, r) = ({q}, {r}) is not admissible")
    theta = strichartz_theta(r, alpha)
    hs = sobolev_norm(f, theta)
    if hs == 0:
        return StrichartzResult(0.0, 0.0, 0.0, theta, 0.0, np.nan, zero_input=True)
    grid = f.grid
    F = forward_transform(f).values
    if T_window is None:
        # time for the spectral centroid to travel a quarter of the box
        P = np.abs(F) ** 2 * grid.spectral_weights
        k = float(np.sqrt((P @ grid.rho**2) / P.sum()))
        T_window = 0.25 * grid.r_max / (alpha * k ** (alpha - 1))
    times = np.linspace(0.0, T_window, (n_times + 1) // 2)
    norms = []
    w = grid.radial_weights
    for sign in (1, -1):
        u = _spectral_flow(F, grid, alpha, sign * times)
        norms.append((np.abs(u) ** r @ w) ** (1 / r))
    norms = np.array(norms)
    body = sum(_trapezoid(nm**q, times) for nm in norms)
    cut = len(times) * 3 // 4
    tail = 0.0
    ps = []
    for nm in norms:
        p = -loglog_slope(times[cut:], nm[cut:])
        ps.append(p)
        if p * q <= 1:
            warnings.warn("decay too slow for a finite tail", NonConvergenceWarning, stacklevel=2)
            tail = np.inf
        else:
            tail += nm[-1] ** q * T_window / (p * q - 1)
    lhs = (body + tail) ** (1 / q)
    return StrichartzResult(lhs / hs, lhs, hs, theta, tail / (body + tail), float(np.mean(ps)))


# -- step atoms and V^2 --------------------------------------------------------------

class StepAtom:
    """a(t) = sum_k 1_[t_(k-1), t_k)(t) S(t) phi_k.

    ``pieces[k]`` is the pullback S(-t) a(t) on the k-th interval; the last
    breakpoint may be +inf.
    """

    def __init__(self, partition, pieces, alpha: float):
        partition = np.asarray(partition, dtype=float)
        if len(partition) < 2 or np.any(np.diff(partition) <= 0):
            raise ValueError("partition must contain t_0 < ... < t_K with K >= 1")
        if len(pieces) != len(partition) - 1:
            raise ValueError("need one piece per interval")
        if not np.isfinite(partition[0]):
            raise ValueError("t_0 must be finite")
        grids = {p.grid for p in pieces}
        if len(grids) != 1:
            raise ValueError("pieces must share one grid")
        self.partition = partition
        self.pieces = list(pieces)
        self.alpha = float(alpha)
        self.grid = pieces[0].grid

    @property
    def K(self) -> int:
        return len(self.pieces)

    def piece_index(self, t: float) -> int | None:
        if t < self.partition[0] or t >= self.partition[-1]:
            return None
        return int(np.searchsorted(self.partition, t, side="right") - 1)

    def evaluate(self, t: float) -> RadialField:
        k = self.piece_index(t)
        if k is None:
            return RadialField(self.grid, np.zeros(self.grid.n_points))
        return free_propagate(self.pieces[k], t, self.alpha)

    def pullback_sequence(self) -> list:
        """Values of S(-t) a(t): 0 before t_0, the pieces, 0 at +inf."""
        z = RadialField(self.grid, np.zeros(self.grid.n_points))
        return [z] + self.pieces + [z]

    def map_pieces(self, fn) -> "StepAtom":
        return StepAtom(self.partition, [fn(p) for p in self.pieces], self.alpha)

    def project(self, lam) -> "StepAtom":
        from .littlewood_paley import project
        return self.map_pieces(lambda p: project(p, lam))

    def __mul__(self, c) -> "StepAtom":
        return self.map_pieces(lambda p: p * c)

    __rmul__ = __mul__

    def __add__(self, other: "StepAtom") -> "StepAtom":
        if other.grid != self.grid or other.alpha != self.alpha:
            raise ValueError("atoms must share grid and alpha")
        pts = np.union1d(self.partition, other.partition)
        zero = RadialField(self.grid, np.zeros(self.grid.n_points))
        pieces = []
        for a, b in zip(pts[:-1], pts[1:]):
            mid = a if not np.isfinite(b) else 0.5 * (a + b)
            ka, kb = self.piece_index(mid), other.piece_index(mid)
            pa = self.pieces[ka] if ka is not None else zero
            pb = other.pieces[kb] if kb is not None else zero
            pieces.append(pa + pb)
        return StepAtom(pts, pieces, self.alpha)

    def support(self) -> tuple:
        return float(self.partition[0]), float(self.partition[-1])


def _gram_sq_dist(seq: list) -> np.ndarray:
    V = np.array([s.values for s in seq])
    w = seq[0].grid.radial_weights
    G = (V * w) @ np.conj(V).T
    d = np.real(np.diag(G))
    return np.maximum(d[:, None] + d[None, :] - 2 * np.real(G), 0.0)


def _max_partition_sum(D: np.ndarray) -> float:
    # best[j] = max_{i<j} best[i] + D[i, j]; squared increments along an increasing path
    n = len(D)
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + D[:j, j])
    return float(best.max())


def v2_norm_exact(atom: StepAtom) -> float:
    """sup over partitions of (sum ||S(-t_k) a(t_k) - S(-t_{k-1}) a(t_{k-1})||^2)^(1/2).

    The pullback is piecewise constant, so the supremum runs over increasing
    index paths through 0, phi_1, ..., phi_K, 0; solved by dynamic programming.
    """
    return float(np.sqrt(_max_partition_sum(_gram_sq_dist(atom.pullback_sequence()))))


def v2_norm_enumerate(atom: StepAtom) -> float:
    """Same supremum by enumerating every subset of the pullback values (small K only)."""
    seq = atom.pullback_sequence()
    if len(seq) > 16:
        raise ValueError("enumeration is exponential; use v2_norm_exact")
    D = _gram_sq_dist(seq)
    best = 0.0
    n = len(seq)
    for m in range(2, n + 1):
        for idx in itertools.combinations(range(n), m):
            best = max(best, sum(D[i, j] for i, j in zip(idx[:-1], idx[1:])))
    return float(np.sqrt(best))


@dataclass
class V2LowerBound:
    value: float
    n_samples: int
    budget_exhausted: bool


def v2_norm_lower(traj: Trajectory, budget: int = 512, restrict: bool = True) -> V2LowerBound:
    """Certified lower bound for the V^2 norm of a sampled trajectory.

    With ``restrict`` the function is taken as zero outside [t_0, t_end).
    Partitions are drawn from the sample times (evenly thinned to ``budget``)
    and optimised exactly over those points.
    """
    alpha = traj.params.alpha
    g = traj.grid
    times = traj.times[:-1] if restrict else traj.times
    idx = np.arange(len(times))
    exhausted = len(idx) > budget
    if exhausted:
        idx = np.unique(np.linspace(0, len(times) - 1, budget).round().astype(int))
    F = forward_transform(RadialField(g, traj.values[idx])).values
    pulls = F * np.exp(1j * np.outer(times[idx], g.rho**alpha))
    z = np.zeros((1, g.n_points))
    seq_vals = np.vstack([z, pulls, z]) if restrict else np.vstack([pulls, z])
    G = (seq_vals * g.spectral_weights) @ np.conj(seq_vals).T
    d = np.real(np.diag(G))
    D = np.maximum(d[:, None] + d[None, :] - 2 * np.real(G), 0.0)
    return V2LowerBound(float(np.sqrt(_max_partition_sum(D))), len(idx), exhausted)


def random_atom(grid: RadialGrid, lams, alpha: float, n_pieces: int, window, rng,
                amplitudes=None) -> StepAtom:
    """Random radial step atom with pieces built from random band profiles."""
    lams = np.atleast_1d(lams)
    amplitudes = np.ones(len(lams)) if amplitudes is None else np.asarray(amplitudes)
    lo, hi = window
    inner = np.sort(rng.uniform(lo, hi, n_pieces - 1))
    partition = np.concatenate([[lo], inner, [hi]])
    pieces = []
    for _ in range(n_pieces):
        F = np.zeros(grid.n_points, dtype=complex)
        for lam, amp in zip(lams, amplitudes):
            c = rng.uniform(0.8, 1.7) * lam
            w = rng.uniform(0.1, 0.3) * lam
            prof = np.exp(-0.5 * ((grid.rho - c) / w) ** 2) * _BUMP.chi_lam(grid.rho, lam)
            prof /= np.sqrt(prof**2 @ grid.spectral_weights)
            F += amp * rng.uniform(0.5, 1.5) * np.exp(2j * np.pi * rng.uniform()) * prof
        pieces.append(inverse_transform(SpectralField(grid, F)))
    return StepAtom(partition, pieces, alpha)


def _atom_product_sq(a1: StepAtom, a2: StepAtom, mult, tau_max, conj_second=True,
                     chunk=128):
    """int ||mult * F[a1 conj(a2)](t)||^2 dt over the common support, piecewise."""
    g = a1.grid
    lo = max(a1.partition[0], a2.partition[0])
    hi = min(a1.partition[-1], a2.partition[-1])
    if not (np.isfinite(hi) and hi > lo):
        raise ValueError("atoms need a finite common support")
    pts = np.union1d(a1.partition, a2.partition)
    pts = pts[(pts >= lo) & (pts <= hi)]
    total = 0.0
    rho_a = g.rho**a1.alpha
    for a, b in zip(pts[:-1], pts[1:]):
        k1, k2 = a1.piece_index(0.5 * (a + b)), a2.piece_index(0.5 * (a + b))
        F1 = forward_transform(a1.pieces[k1]).values
        F2 = forward_transform(a2.pieces[k2]).values
        times = _time_mesh(a, b, tau_max, min_steps=8)
        q = np.empty(len(times))
        for s in range(0, len(times), chunk):
            t = times[s:s + chunk]
            u = inverse_transform(SpectralField(g, F1 * np.exp(-1j * np.outer(t, rho_a)))).values
            v = inverse_transform(SpectralField(g, F2 * np.exp(-1j * np.outer(t, rho_a)))).values
            q[s:s + chunk] = _spacetime_sq(u * (np.conj(v) if conj_second else v), g, mult, t)
        total += _trapezoid(q, times)
    return total


def transference_scan(u1: StepAtom, u2: StepAtom, mu, lam1, lam2) -> DyadicRecord:
    """|| P_{<=mu}(P_lam1 u1 conj(P_lam2 u2)) ||_{L^2_{t,x}} against
    C(mu, lam1) ||P_lam1 u1||_{V^2} ||P_lam2 u2||_{V^2}."""
    lam1, lam2, mu = (DyadicIndex.of(x).value for x in (lam1, lam2, mu))
    g, alpha = u1.grid, u1.alpha
    lam_hi = max(lam1, lam2)
    _aliasing_guard(g, lam_hi)
    p1, p2 = u1.project(lam1), u2.project(lam2)
    lo, hi = max(p1.partition[0], p2.partition[0]), min(p1.partition[-1], p2.partition[-1])
    _box_guard(g, alpha, lam_hi, max(abs(lo), abs(hi)), "atom support")
    tau_max = alpha * (2 * lam_hi) ** (alpha - 1) * 2 * mu
    lhs = np.sqrt(_atom_product_sq(p1, p2, _BUMP.chi_leq(g.rho, mu), tau_max))
    v1, v2 = v2_norm_exact(p1), v2_norm_exact(p2)
    rhs = bilinear_constant(mu, lam1, alpha) * v1 * v2
    return _record(mu, lam1, lam2, lhs, rhs, v2_1=v1, v2_2=v2)


def x_norm_proxy(atom: StepAtom, lams=None) -> float:
    """(sum_lam ||P_lam a||_{V^2}^2)^(1/2) over the grid-resolvable octaves."""
    if lams is None:
        lo, hi = resolvable_range(atom.grid)
        lams = [2.0**k for k in range(lo, hi + 1)]
    return float(np.sqrt(sum(v2_norm_exact(atom.project(lam)) ** 2 for lam in lams)))


def _atom_tau_max(u, v, mult_band_max=None):
    g = u.grid
    tops = []
    for a in (u, v):
        F = np.array([np.abs(forward_transform(p).values) for p in a.pieces])
        mask = F.max(axis=0) > 1e-12 * F.max()
        tops.append(g.rho[mask].max() if mask.any() else g.drho)
    top = max(tops)
    return top**u.alpha


def sum_bilinear_check(u: StepAtom, v: StepAtom, lams=None) -> DyadicRecord:
    """|| (-Delta)^((alpha-3)/4) (u conj(v)) ||_{L^2_{t,x}} / (||u||_X ||v||_X), with the
    X norm replaced by its finite dyadic proxy."""
    alpha = u.alpha
    if not 1 < alpha <= 2:
        raise ValueError("need 1 < alpha <= 2")
    g = u.grid
    mult = g.rho ** ((alpha - 3) / 2)
    lhs = np.sqrt(_atom_product_sq(u, v, mult, _atom_tau_max(u, v)))
    rhs = x_norm_proxy(u, lams) * x_norm_proxy(v, lams)
    return _record(0.0, 0.0, 0.0, lhs, rhs)


def sum_bilinear_decomposition(u: StepAtom, v: StepAtom) -> dict:
    """Split ||(-Delta)^((alpha-3)/4)(u conj(v))||^2 over output frequencies.

    Uses P_{<= mu_min}, P_mu for the resolvable mu, and P_{> mu_max}, whose
    symbols sum to one exactly.  Returns {label: contribution}.
    """
    g = u.grid
    alpha = u.alpha
    base = g.rho ** ((alpha - 3) / 2)
    lo, hi = resolvable_range(g)
    tau = _atom_tau_max(u, v)
    parts = {}
    mlo = 2.0**lo
    parts[f"<= {mlo:g}"] = _atom_product_sq(u, v, base * np.sqrt(_BUMP.chi_leq(g.rho, mlo)), tau)
    for k in range(lo + 1, hi + 1):
        mu = 2.0**k
        parts[f"{mu:g}"] = _atom_product_sq(u, v, base * np.sqrt(_BUMP.chi_lam(g.rho, mu)), tau)
    parts[f"> {2.0**hi:g}"] = _atom_product_sq(
        u, v, base * np.sqrt(_BUMP.chi_gt(g.rho, 2.0**hi)), tau)
    return parts
