"""
Element-wise machine-error model.

Each exact factor U_p is replaced by a perturbed Ũ_p whose entries carry a
relative standard error ε_m. Trials draw their noise from counter-based
streams keyed by (master_seed, trial), so a trial's result never depends on
which worker evaluates it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Literal, Sequence, Tuple, get_args

import numpy as np

from .matrix_core import GeneratorSet, RngStream, as_matrix, spectral_norm, spectral_norms
from .product_formula import Schedule, exact_flow, ordered_product, schedule_factors

logger = logging.getLogger(__name__)

NoiseMode = Literal["gaussian", "gaussian_unitary", "norm_stabilized", "lognormal"]
NOISE_MODES = get_args(NoiseMode)

MAX_EPSILON_M = 0.5  # the element-wise model stops making sense beyond this
NOISE_STREAM = 0  # first stream-path component of per-trial noise
SAMPLING_STREAM = 1  # first stream-path component of random generator sets
CHUNK_ELEMENTS = 1 << 20  # matrix entries per batch of trials


# =============================================================================
# SPECS AND RESULTS
# =============================================================================

@dataclass(frozen=True)
class NoiseSpec:
    """
    Machine epsilon, perturbation mode and master seed.

    Modes:
        gaussian: additive Gaussian noise, σ = ε_m|U_ij| per entry
        gaussian_unitary: gaussian, then projected to the nearest unitary
        norm_stabilized: gaussian, then rescaled to the exact factor's spectral norm
        lognormal: multiplicative noise exp(ε_m z) per entry
    """

    epsilon_m: float
    mode: NoiseMode = "gaussian"
    master_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon_m) and 0 <= self.epsilon_m < MAX_EPSILON_M):
            raise ValueError(f"epsilon_m must lie in [0, {MAX_EPSILON_M}), got {self.epsilon_m}")
        if self.mode not in NOISE_MODES:
            raise ValueError(f"Invalid mode '{self.mode}'. Must be one of: {', '.join(NOISE_MODES)}")
        RngStream(self.master_seed)  # validates the seed range
        object.__setattr__(self, "epsilon_m", float(self.epsilon_m))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def with_epsilon(self, epsilon_m: float) -> "NoiseSpec":
        return NoiseSpec(epsilon_m, self.mode, self.master_seed)

    def to_dict(self) -> Dict[str, Any]:
        return {"epsilon_m": self.epsilon_m, "mode": self.mode, "master_seed": self.master_seed}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NoiseSpec":
        return cls(float(data["epsilon_m"]), data.get("mode", "gaussian"), int(data.get("master_seed", 0)))


@dataclass(frozen=True, eq=False)
class NoisyProductResult:
    trial: int
    ideal_product: np.ndarray
    noisy_product: np.ndarray
    machine_error: float
    net_error: float
    per_factor_rel_norm_error: Tuple[float, ...]
    per_factor_norm_ratio: Tuple[float, ...]
    norm_ratio: float


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Vectorized outcome of a block of trials, one row per trial."""

    trials: np.ndarray
    epsilon: np.ndarray
    epsilon_net: np.ndarray
    norm_ratio: np.ndarray
    factor_error: np.ndarray  # (T, N) relative norm error of each factor
    factor_ratio: np.ndarray  # (T, N) ‖Ũ_p‖ / ‖U_p‖
    noisy_products: np.ndarray


# =============================================================================
# PERTURBATION
# =============================================================================

def trial_stream(spec: NoiseSpec, trial: int) -> RngStream:
    return RngStream(spec.master_seed, (NOISE_STREAM, trial))


def trial_normals(spec: NoiseSpec, trial: int, n_factors: int, dim: int) -> np.ndarray:
    """Standard normals of one trial laid out as (p, i, j, real/imaginary)."""
    return trial_stream(spec, trial).generator().standard_normal((n_factors, dim, dim, 2))


def nearest_unitary(stack: np.ndarray) -> np.ndarray:
    """Unitary polar factor W V† of each matrix W Σ V† in the stack."""
    W, _, Vh = np.linalg.svd(stack)
    return W @ Vh


def perturb_stack(factors: np.ndarray, spec: NoiseSpec, normals: np.ndarray) -> np.ndarray:
    """
    Apply the noise model to a stack of matrices given pre-drawn standard normals.

    Matrices with an all-real representation get real noise with the full
    standard deviation; complex matrices split the variance evenly between
    real and imaginary parts. Zero entries stay exactly zero in every mode
    except the two that rescale or project the whole matrix.
    """
    if spec.epsilon_m == 0.0:
        return np.array(factors, dtype=np.complex128, copy=True)

    eps = spec.epsilon_m
    z_re = normals[..., 0]
    z_im = normals[..., 1]
    real = ~np.any(np.imag(factors), axis=(-2, -1), keepdims=True)
    complex_z = (z_re + 1j * z_im) / math.sqrt(2)

    if spec.mode == "lognormal":
        noisy = factors * np.exp(eps * np.where(real, z_re, complex_z))
    else:
        noisy = factors + eps * np.abs(factors) * np.where(real, z_re, complex_z)

    if spec.mode == "gaussian_unitary":
        noisy = nearest_unitary(noisy)
    elif spec.mode == "norm_stabilized":
        target = spectral_norms(factors)
        current = spectral_norms(noisy)
        scale = np.divide(target, current, out=np.ones_like(target), where=current > 0)
        noisy = noisy * scale[..., None, None]
    return noisy


def perturb(U: Any, spec: NoiseSpec, stream: RngStream) -> np.ndarray:
    """Perturb a single matrix with normals drawn from stream."""
    U = as_matrix(U, "U")
    normals = stream.generator().standard_normal(U.shape + (2,))
    return perturb_stack(U, spec, normals)


# =============================================================================
# NOISY PRODUCTS
# =============================================================================

def chunk_size(n_factors: int, dim: int) -> int:
    """Trials per batch; depends on problem shape only, never on thread count."""
    return max(1, CHUNK_ELEMENTS // max(1, n_factors * dim * dim))


def simulate_trials(
    factors: np.ndarray,
    ideal: np.ndarray,
    flow: np.ndarray,
    spec: NoiseSpec,
    trials: Sequence[int],
) -> TrialBatch:
    """
    Run a block of trials against precomputed exact factors.

    Args:
        factors: (N, ℓ, ℓ) exact factors, p = 1 first
        ideal: noiseless product of factors
        flow: exact flow e^{Aλ}
        spec: noise specification
        trials: trial indices of this block
    """
    n_factors, dim = factors.shape[0], factors.shape[-1]
    if n_factors == 0:
        raise ValueError("schedule has no factors to perturb")
    trials = np.asarray(trials, dtype=np.int64)

    normals = np.stack([trial_normals(spec, int(t), n_factors, dim) for t in trials])
    exact = np.broadcast_to(factors, (len(trials),) + factors.shape)
    noisy = perturb_stack(exact, spec, normals)

    factor_norms = spectral_norms(factors)
    factor_error = spectral_norms(noisy - exact) / factor_norms
    factor_ratio = spectral_norms(noisy) / factor_norms

    if spec.epsilon_m == 0.0:
        products = np.repeat(ideal[None], len(trials), axis=0)
    else:
        products = ordered_product(noisy)
    ideal_norm = spectral_norm(ideal)
    flow_norm = spectral_norm(flow)

    # an overflowed product has no SVD; its errors are reported as inf
    finite = np.isfinite(products).all(axis=(-2, -1))
    if not finite.all():
        logger.debug("%d overflowed product(s) in trials %d..%d", int((~finite).sum()), trials[0], trials[-1])

    def norms(stack: np.ndarray) -> np.ndarray:
        out = np.full(len(trials), np.inf)
        out[finite] = spectral_norms(stack[finite])
        return out

    return TrialBatch(
        trials=trials,
        epsilon=norms(ideal - products) / ideal_norm,
        epsilon_net=norms(flow - products) / flow_norm,
        norm_ratio=norms(products) / ideal_norm,
        factor_error=factor_error,
        factor_ratio=factor_ratio,
        noisy_products=products,
    )


def noiseless_product(factors: np.ndarray) -> np.ndarray:
    """Ideal product through the same batched path the noisy products take."""
    return ordered_product(factors[None])[0]


def noisy_product(gens: GeneratorSet, schedule: Schedule, spec: NoiseSpec, trial: int) -> NoisyProductResult:
    """Machine error ε and net error ε_net of one trial."""
    factors = schedule_factors(gens, schedule)
    ideal = noiseless_product(factors)
    flow = exact_flow(gens, schedule.total_time)
    batch = simulate_trials(factors, ideal, flow, spec, [trial])
    return NoisyProductResult(
        trial=int(trial),
        ideal_product=ideal,
        noisy_product=batch.noisy_products[0],
        machine_error=float(batch.epsilon[0]),
        net_error=float(batch.epsilon_net[0]),
        per_factor_rel_norm_error=tuple(float(x) for x in batch.factor_error[0]),
        per_factor_norm_ratio=tuple(float(x) for x in batch.factor_ratio[0]),
        norm_ratio=float(batch.norm_ratio[0]),
    )
