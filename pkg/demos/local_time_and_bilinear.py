"""
Scaling laws: local existence time and the bilinear gain
========================================================

Two exponents measured by log-log fits.  The first is how the largest time
with a contracting Picard iteration shrinks as the data move to higher
frequency Lambda.  The second is the power of lam in the space-time L^2 norm
of a product of two free waves at frequency lam, localised at output
frequency mu.
"""

# %%
from fracthartree.dynamics import local_time_probe
from fracthartree.estimates import band_profile, bilinear_scan, loglog_slope
from fracthartree.spectral import ModelParams, RadialGrid

params = ModelParams(alpha=1.5)
grid = RadialGrid(2048, 64.0)
Lambdas = [2, 4, 8, 16]
T = [local_time_probe(2.0, L, params, grid=grid, bisections=12).T_star for L in Lambdas]
for L, t in zip(Lambdas, T):
    print(f"Lambda={L:3d}  T*={t:.5e}")
print("slope:", loglog_slope(Lambdas, T), "expected", -params.alpha)

# %%
wide = RadialGrid(16384, 64.0)
lams = [8.0, 16.0, 32.0, 64.0]
for alpha in (1.0, 1.25, 1.5, 2.0):
    lhs = []
    for lam in lams:
        f = band_profile(wide, lam)
        lhs.append(bilinear_scan(lam, lam, 1.0, f, f, alpha).lhs)
    print(f"alpha={alpha:4.2f}  slope {loglog_slope(lams, lhs):+.3f}  expected {(1 - alpha) / 2:+.3f}")
