"""
Delta-constrained shell integral: closed form against a mollified brute force
=============================================================================

The integral over eta of phi(|eta|) psi(|xi - eta|) delta(tau - |eta|^a + |xi - eta|^a)
collapses to a one-dimensional radial integral.  Here we compare that radial
formula with a direct two-dimensional quadrature where the delta is replaced
by a narrow Gaussian, and show why the lower integration limit matters for a < 2.
"""

# %%
import warnings

import numpy as np

from fracthartree.estimates import (BumpPair, NonConvergenceWarning, brute_force_I,
                                    closed_form_I, exact_lower_limit, lower_limit,
                                    sample_admissible, vanishing_threshold)

pair = BumpPair.windowed_gaussians(2.0, 0.3, 1.0, 0.2)
rng = np.random.default_rng(0)

# %%
# A handful of random admissible points per exponent.
print(f"{'alpha':>5} {'tau':>8} {'|xi|':>8} {'closed':>12} {'brute':>12} {'relerr':>9}")
for alpha in (1.0, 1.5, 2.0):
    for tau, xi, closed in sample_admissible(pair, alpha, 4, rng):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            brute = brute_force_I(pair, tau, xi, alpha)
        print(f"{alpha:5.2f} {tau:8.4f} {xi:8.4f} {closed:12.6e} {brute:12.6e} "
              f"{abs(brute - closed) / closed:9.1e}")

# %%
# The naive lower limit (|xi|^2 + tau^(2/a)) / (2|xi|) is only a necessary
# condition for a < 2; the exact one comes from the angular root condition.
tau, xi, alpha = 1.5, 2.2, 1.5
print("naive lower limit:", lower_limit(tau, xi, alpha))
print("exact lower limit:", exact_lower_limit(tau, xi, alpha))
print("closed form, exact limit:", closed_form_I(pair, tau, xi, alpha))
print("closed form, naive limit:", closed_form_I(pair, tau, xi, alpha, limit="naive"))

# %%
# Beyond the vanishing threshold the closed form is exactly zero.
thr = vanishing_threshold(pair, 1.0, alpha)
print("threshold:", thr, "value just beyond:", closed_form_I(pair, 1.01 * thr, 1.0, alpha))
