"""
Norm growth of the cubic Picard term below L^2
==============================================

Annulus data at frequency lam, evolved for a time eps lam^-a, produce a
cubic Duhamel term whose H^s norm outgrows the cube of the datum's H^s norm
exactly when s < 0.
"""

# %%
import numpy as np

from fracthartree.illposedness import build_annulus, first_picard_term, growth_experiment
from fracthartree.spectral import ModelParams, RadialGrid

grid = RadialGrid(8192, 64.0)
lams = [4.0, 8.0, 16.0, 32.0]
params = ModelParams(alpha=1.5)

# The cubic term does not depend on s, so compute it once.
terms = {lam: first_picard_term(build_annulus(lam, grid), 0.05 * lam**-1.5, params)
         for lam in lams}

# %%
for s in (-0.25, 0.0, 0.5):
    rec = growth_experiment(lams, s, grid=grid, terms=terms)
    print(f"s = {s:+.2f}")
    for row in rec.rows():
        print(f"  lam={row['lambda']:5.1f}  |phi|={row['norm_phi']:.4e}  "
              f"|Phi|={row['norm_Phi']:.4e}  ratio={row['ratio']:.4e}")
    sl = rec.slopes()
    print(f"  slopes: phi {sl['norm_phi']:.3f} (want {sl['predicted_norm_phi']:.3f}), "
          f"Phi {sl['norm_Phi']:.3f} (want {sl['predicted_norm_Phi']:.3f}), "
          f"ratio {sl['ratio']:+.3f} (want {sl['predicted_ratio']:+.3f})")

# %%
print("ratio grows with lam for s < 0:", np.all(np.diff(
    growth_experiment(lams, -0.25, grid=grid, terms=terms).ratio) > 0))
