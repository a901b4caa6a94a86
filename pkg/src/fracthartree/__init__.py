"""Radial spectral tools for the mass-critical fractional Hartree equation.

Modules: ``spectral`` (grid, transforms, Riesz potential, norms),
``littlewood_paley`` (dyadic projectors), ``dynamics`` (free flow, splitting,
Picard, scattering, local time), ``estimates`` (delta integral, bilinear,
Strichartz and V^2 checks), ``illposedness`` (annulus norm growth) and
``runner`` (config-driven experiments).
"""

__version__ = "0.1.0"

from .spectral import (GridMismatchError, ModelParams, RadialField, RadialGrid,  # noqa: E402
                       SpectralField, apply_fractional_laplacian_power, forward_transform,
                       inner_product, inverse_transform, l2_norm, plancherel_norm,
                       riesz_constant, riesz_convolution, sobolev_norm)
from .littlewood_paley import (DyadicIndex, DyadicRangeError, build_bump, project,  # noqa: E402
                               project_gt, project_leq, project_tilde, resolvable_range)
from .dynamics import (BlowUpError, PicardDivergence, Trajectory, duhamel_J,  # noqa: E402
                       duhamel_trajectory, energy, evolve, free_flow, free_propagate,
                       local_time_probe, mass, picard_iterate, rescale, scattering_extract)
from .estimates import (BumpPair, DyadicReport, StepAtom, bernstein_scan,  # noqa: E402
                        bilinear_scan, bilinear_scan_leq, brute_force_I, closed_form_I,
                        strichartz_ratio, sum_bilinear_check, transference_scan,
                        v2_norm_exact, v2_norm_lower)
from .illposedness import (AnnulusDatum, GrowthRecord, build_annulus,  # noqa: E402
                           first_picard_term, growth_experiment)

__all__ = [
    "__version__",
    "GridMismatchError",
    "ModelParams",
    "RadialField",
    "RadialGrid",
    "SpectralField",
    "apply_fractional_laplacian_power",
    "forward_transform",
    "inner_product",
    "inverse_transform",
    "l2_norm",
    "plancherel_norm",
    "riesz_constant",
    "riesz_convolution",
    "sobolev_norm",
    "DyadicIndex",
    "DyadicRangeError",
    "build_bump",
    "project",
    "project_gt",
    "project_leq",
    "project_tilde",
    "resolvable_range",
    "BlowUpError",
    "PicardDivergence",
    "Trajectory",
    "duhamel_J",
    "duhamel_trajectory",
    "energy",
    "evolve",
    "free_flow",
    "free_propagate",
    "local_time_probe",
    "mass",
    "picard_iterate",
    "rescale",
    "scattering_extract",
    "BumpPair",
    "DyadicReport",
    "StepAtom",
    "bernstein_scan",
    "bilinear_scan",
    "bilinear_scan_leq",
    "brute_force_I",
    "closed_form_I",
    "strichartz_ratio",
    "sum_bilinear_check",
    "transference_scan",
    "v2_norm_exact",
    "v2_norm_lower",
    "AnnulusDatum",
    "GrowthRecord",
    "build_annulus",
    "first_picard_term",
    "growth_experiment",
]
