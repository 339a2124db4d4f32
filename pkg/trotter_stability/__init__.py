"""
Trotter Stability - numerical stability of Trotter-Suzuki product formulas

Builds product-formula schedules, perturbs every exponential with
element-wise machine error, and compares the resulting error statistics
with closed-form bounds.
"""

__version__ = "1.0.0"

from .matrix_core import GeneratorSet, RngStream, mat_exp, relative_distance, spectral_norm
from .noise_model import NoiseSpec, noisy_product, perturb
from .product_formula import OrderSpec, Schedule, build_schedule, exponential_count, ideal_error
from .stability_analysis import fit_growth, monte_carlo, run_campaign, theorem_bounds

__all__ = [
    "GeneratorSet",
    "NoiseSpec",
    "OrderSpec",
    "RngStream",
    "Schedule",
    "build_schedule",
    "exponential_count",
    "fit_growth",
    "ideal_error",
    "mat_exp",
    "monte_carlo",
    "noisy_product",
    "perturb",
    "relative_distance",
    "run_campaign",
    "spectral_norm",
    "theorem_bounds",
]
