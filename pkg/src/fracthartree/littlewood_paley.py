"""Smooth dyadic frequency projectors on radial fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (RadialField, RadialGrid, SpectralField, forward_transform,
                       inverse_transform)

__all__ = [
    "DyadicIndex",
    "DyadicRangeError",
    "BumpFamily",
    "build_bump",
    "resolvable_range",
    "project",
    "project_leq",
    "project_gt",
    "project_tilde",
]


class DyadicRangeError(ValueError):
    """Requested dyadic frequency is not resolvable on the grid."""


@dataclass(frozen=True, order=True)
class DyadicIndex:
    exponent: int

    @property
    def value(self) -> float:
        return 2.0 ** self.exponent

    @classmethod
    def of(cls, lam) -> "DyadicIndex":
        if isinstance(lam, DyadicIndex):
            return lam
        k = np.log2(float(lam))
        if abs(k - round(k)) > 1e-12:
            raise ValueError(f"{lam} is not a power of two")
        return cls(int(round(k)))


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _cutoff(s):
    """Even C^infinity cutoff: 1 on [-1, 1], 0 outside (-2, 2)."""
    a = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    mid = (a > 1.0) & (a < 2.0)
    p, q = _psi(2.0 - a[mid]), _psi(a[mid] - 1.0)
    out[mid] = p / (p + q)
    return out


class BumpFamily:
    """The cutoff rho, annulus bump chi and its dyadic rescalings.

    Every multiplier is evaluated in telescoped form so that plateaus are
    exactly 1.0 and complements exactly 0.0 in floating point.
    """

    def cutoff(self, s):
        return _cutoff(s)

    def chi(self, xi):
        return _cutoff(xi) - _cutoff(2.0 * np.asarray(xi, dtype=float))

    def chi_lam(self, xi, lam: float):
        xi = np.asarray(xi, dtype=float)
        return _cutoff(xi / lam) - _cutoff(2.0 * xi / lam)

    def chi_leq(self, xi, lam: float):
        return _cutoff(np.asarray(xi, dtype=float) / lam)

    def chi_gt(self, xi, lam: float):
        return 1.0 - self.chi_leq(xi, lam)

    def chi_tilde(self, xi, lam: float):
        # chi_{lam/2} + chi_lam + chi_{2 lam}, telescoped
        xi = np.asarray(xi, dtype=float)
        return _cutoff(xi / (2.0 * lam)) - _cutoff(4.0 * xi / lam)


_BUMP = BumpFamily()


def build_bump() -> BumpFamily:
    return _BUMP


def resolvable_range(grid: RadialGrid) -> tuple[int, int]:
    """Smallest and largest dyadic exponents k with 2 rho_1 <= 2^k <= rho_max / 4."""
    lo = int(np.ceil(np.log2(2 * grid.drho)))
    hi = int(np.floor(np.log2(grid.rho_max / 4)))
    return lo, hi


def _check(grid: RadialGrid, lam) -> float:
    idx = DyadicIndex.of(lam)
    lo, hi = resolvable_range(grid)
    if not lo <= idx.exponent <= hi:
        raise DyadicRangeError(
            f"lambda = 2^{idx.exponent} outside resolvable range [2^{lo}, 2^{hi}]")
    return idx.value


def _apply(f, mult):
    if isinstance(f, SpectralField):
        return SpectralField(f.grid, f.values * mult(f.grid.rho))
    if isinstance(f, RadialField):
        F = forward_transform(f)
        return inverse_transform(SpectralField(f.grid, F.values * mult(f.grid.rho)))
    raise TypeError("expected a RadialField or SpectralField")


def project(f, lam):
    """P_lam f."""
    lam = _check(f.grid, lam)
    return _apply(f, lambda rho: _BUMP.chi_lam(rho, lam))


def project_leq(f, lam):
    """P_{<= lam} f."""
    lam = _check(f.grid, lam)
    return _apply(f, lambda rho: _BUMP.chi_leq(rho, lam))


def project_gt(f, lam):
    """P_{> lam} f = f - P_{<= lam} f."""
    lam = _check(f.grid, lam)
    return _apply(f, lambda rho: _BUMP.chi_gt(rho, lam))


def project_tilde(f, lam):
    lam = _check(f.grid, lam)
    return _apply(f, lambda rho: _BUMP.chi_tilde(rho, lam))
