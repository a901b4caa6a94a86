"""Norm growth of the first cubic Picard term for annulus data.

For phi with spectrum the indicator of {lam <= |xi| <= 2 lam} and
T = eps lam^-alpha, the cubic term Phi(T) = int_0^T S(T - t) (R|S(t)phi|^2 S(t)phi) dt
grows like lam^(s + 9/2) in H^s while ||phi||_{H^s} ~ lam^(s + 3/2), so the
ratio ||Phi|| / ||phi||^3 ~ lam^(-2s) is unbounded for s < 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import density_width, duhamel_trajectory, free_flow
from .estimates import loglog_slope
from .spectral import (ModelParams, RadialField, RadialGrid, SpectralField,
                       forward_transform, inverse_transform, sobolev_norm)

__all__ = [
    "RegimeWarning",
    "AnnulusDatum",
    "GrowthRecord",
    "build_annulus",
    "annulus_l2_norm",
    "first_picard_term",
    "phase_smallness",
    "support_leakage",
    "growth_experiment",
]


class RegimeWarning(UserWarning):
    """Time outside the short-time regime t <= 0.1 lam^-alpha."""


@dataclass(frozen=True)
class AnnulusDatum:
    lam: float
    field: RadialField

    @property
    def grid(self) -> RadialGrid:
        return self.field.grid

    def spectrum(self) -> SpectralField:
        return forward_transform(self.field)


def build_annulus(lam: float, grid: RadialGrid) -> AnnulusDatum:
    """Inverse transform of the sharp indicator of lam <= rho <= 2 lam."""
    if not 2 * lam < grid.rho_max / 2:
        raise ValueError(f"aliasing guard: 2 lam = {2 * lam} >= rho_max / 2 = {grid.rho_max / 2:.4g}")
    rho = grid.rho
    F = ((rho >= lam) & (rho <= 2 * lam)).astype(float)
    return AnnulusDatum(float(lam), inverse_transform(SpectralField(grid, F)))


def annulus_l2_norm(lam: float) -> float:
    """sqrt(vol(A_lam) / (2 pi)^3) with vol = 4 pi (7 lam^3 / 3)."""
    return float(np.sqrt(4 * np.pi * 7 * lam**3 / 3 / (2 * np.pi) ** 3))


def _n_steps(t, lam, alpha, max_dt_scale=0.05, min_steps=16):
    return max(min_steps, int(np.ceil(t * lam**alpha / max_dt_scale)))


def first_picard_term(datum: AnnulusDatum, t: float, params: ModelParams | None = None,
                      n_steps: int | None = None, eps_max: float = 0.1,
                      ref_width: float | None = None) -> RadialField:
    """Phi(t) through the trapezoid Duhamel recursion on the free flow.

    Warns with ``RegimeWarning`` when t > eps_max lam^-alpha; the value is
    still returned.
    """
    params = params or ModelParams()
    alpha = params.alpha
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = datum.grid
    if t == 0:
        return RadialField(g, np.zeros(g.n_points))
    if t > eps_max * datum.lam ** -alpha:
        warnings.warn(f"t = {t:.3g} exceeds {eps_max} lam^-alpha; short-time regime violated",
                      RegimeWarning, stacklevel=2)
    n = n_steps or _n_steps(t, datum.lam, alpha)
    times = np.linspace(0.0, t, n + 1)
    u = free_flow(datum.field, times, params)
    w = ref_width if ref_width is not None else density_width(datum.field)
    return duhamel_trajectory(u, u, u, ref_width=w).state(-1)


def phase_smallness(lam: float, t: float, alpha: float, n_samples: int = 20000,
                    rng=None) -> float:
    """max |t g| over sampled eta, sigma, zeta in A_lam with xi = eta + sigma + zeta in A_lam,
    where g = |xi|^a - |eta|^a + |sigma|^a - |zeta|^a."""
    rng = np.random.default_rng(0) if rng is None else rng

    def shell(n):
        r = (lam**3 + rng.uniform(size=n) * 7 * lam**3) ** (1 / 3)
        v = rng.normal(size=(n, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True) * r[:, None]

    eta, sig, zeta = shell(n_samples), shell(n_samples), shell(n_samples)
    xi = np.linalg.norm(eta + sig + zeta, axis=1)
    keep = (xi >= lam) & (xi <= 2 * lam)
    if not np.any(keep):
        return 0.0
    n = lambda v: np.linalg.norm(v[keep], axis=1) ** alpha  # noqa: E731
    g = xi[keep] ** alpha - n(eta) + n(sig) - n(zeta)
    return float(np.max(np.abs(t * g)))


def support_leakage(f: RadialField, cutoff: float) -> float:
    """max |F| beyond ``cutoff`` relative to max |F|."""
    F = np.abs(forward_transform(f).values)
    peak = F.max()
    if peak == 0:
        return 0.0
    out = F[f.grid.rho > cutoff]
    return float(out.max() / peak) if out.size else 0.0


@dataclass
class GrowthRecord:
    s: float
    alpha: float
    eps: float
    lams: np.ndarray
    norm_phi: np.ndarray
    norm_Phi: np.ndarray
    times: np.ndarray
    leakage: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def ratio(self) -> np.ndarray:
        return self.norm_Phi / self.norm_phi**3

    @property
    def slope_phi(self) -> float:
        return loglog_slope(self.lams, self.norm_phi)

    @property
    def slope_Phi(self) -> float:
        return loglog_slope(self.lams, self.norm_Phi)

    @property
    def slope_ratio(self) -> float:
        return loglog_slope(self.lams, self.ratio)

    def rows(self):
        for i, lam in enumerate(self.lams):
            yield {"lambda": lam, "norm_phi": self.norm_phi[i], "norm_Phi": self.norm_Phi[i],
                   "ratio": self.ratio[i], "T": self.times[i]}

    def slopes(self) -> dict:
        return {"norm_phi": self.slope_phi, "norm_Phi": self.slope_Phi, "ratio": self.slope_ratio,
                "predicted_norm_phi": self.s + 1.5, "predicted_norm_Phi": self.s + 4.5,
                "predicted_ratio": -2 * self.s}


def growth_experiment(lams, s: float, alpha: float = 1.5, eps: float = 0.05,
                      grid: RadialGrid | None = None, terms=None) -> GrowthRecord:
    """H^s norms of phi and Phi(eps lam^-alpha) over ``lams``.

    ``terms`` may pass precomputed {lam: Phi} to reuse the cubic term across s.
    """
    lams = np.sort(np.asarray(lams, dtype=float))
    if len(lams) < 3:
        raise ValueError("need at least three lambda values for a slope")
    grid = grid or RadialGrid(8192, 64.0)
    params = ModelParams(alpha=alpha)
    nphi, nPhi, ts, leak = [], [], [], []
    for lam in lams:
        d = build_annulus(lam, grid)
        T = eps * lam**-alpha
        Phi = terms[lam] if terms is not None and lam in terms else first_picard_term(d, T, params)
        nphi.append(sobolev_norm(d.field, s))
        nPhi.append(sobolev_norm(Phi, s))
        ts.append(T)
        leak.append(support_leakage(Phi, 6 * lam))
    return GrowthRecord(float(s), float(alpha), float(eps), lams, np.array(nphi),
                        np.array(nPhi), np.array(ts), np.array(leak))
