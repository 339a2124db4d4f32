"""
Stability analysis.

Monte Carlo campaigns over the noise model, the analytic reference
distributions and bounds they are checked against, and a growth-trend fit
that tells linear from exponential error growth.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.stats

from .matrix_core import GeneratorSet, is_unitary
from .noise_model import (
    NoiseSpec,
    TrialBatch,
    chunk_size,
    noiseless_product,
    perturb_stack,
    simulate_trials,
    trial_normals,
)
from .product_formula import Schedule, exact_flow, schedule_factors

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

STABILITY_CONSTANT = math.sqrt(5 * math.e**2 - 4 * math.e)  # ≈ 5.10609
QUANTILE_LEVELS = (0.5, 0.9, 0.99)
MIN_TRIALS = 100
SLACK_STDERRS = 3.0  # statistical slack of every verdict
LOG_FLOAT_MAX = math.log(np.finfo(float).max)

Verdict = Literal["satisfied", "violated", "not-applicable"]


class NonFiniteTrialError(RuntimeError):
    """A Monte Carlo trial produced a non-finite machine error."""


# =============================================================================
# SUMMARY STATISTICS
# =============================================================================

@dataclass(frozen=True)
class ErrorStats:
    trials: int
    mean: float
    std: float
    quantiles: Dict[float, float]
    mean_stderr: float
    std_stderr: float

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["quantiles"] = {str(q): v for q, v in self.quantiles.items()}
        return data


def summarize(samples: Sequence[float]) -> ErrorStats:
    """Sample mean, standard deviation, standard errors and quantiles."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    std = float(np.std(x, ddof=1))
    quantiles = np.quantile(x, QUANTILE_LEVELS, method="linear")
    return ErrorStats(
        trials=n,
        mean=float(np.mean(x)),
        std=std,
        quantiles={q: float(v) for q, v in zip(QUANTILE_LEVELS, quantiles)},
        mean_stderr=std / math.sqrt(n),
        std_stderr=std / math.sqrt(2 * (n - 1)),
    )


def rms(samples: Sequence[float]) -> float:
    """Root-mean-square about zero."""
    x = np.asarray(samples, dtype=float)
    return float(math.sqrt(np.mean(x * x)))


# =============================================================================
# MONTE CARLO CAMPAIGNS
# =============================================================================

@dataclass(frozen=True, eq=False)
class CampaignResult:
    """Everything a noise campaign measured, in trial-index order."""

    N: int
    dim: int
    spec: NoiseSpec
    epsilon: np.ndarray
    epsilon_net: np.ndarray
    norm_ratio: np.ndarray
    factor_error: np.ndarray  # pooled over trials and factors
    factor_ratio_std: float
    factors_unitary: bool

    @property
    def stats(self) -> ErrorStats:
        return summarize(self.epsilon)

    @property
    def net_stats(self) -> ErrorStats:
        return summarize(self.epsilon_net)

    @property
    def factor_error_rms(self) -> float:
        return rms(self.factor_error)

    @property
    def norm_condition_holds(self) -> bool:
        """Whether σ(‖Ũ_p‖/‖U_p‖) ≤ 1/√N, the premise of the linear bound."""
        return self.factor_ratio_std <= 1.0 / math.sqrt(self.N)


def _run_chunks(
    factors: np.ndarray,
    ideal: np.ndarray,
    flow: np.ndarray,
    spec: NoiseSpec,
    trials: int,
    threads: int,
) -> List[TrialBatch]:
    size = chunk_size(factors.shape[0], factors.shape[-1])
    blocks = [range(start, min(start + size, trials)) for start in range(0, trials, size)]
    logger.debug("Running %d trials in %d blocks on %d threads", trials, len(blocks), threads)

    def work(block: range) -> TrialBatch:
        return simulate_trials(factors, ideal, flow, spec, block)

    if threads <= 1:
        return [work(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map() yields in submission order, so the fold below is by trial index
        return list(pool.map(work, blocks))


def run_campaign(
    gens: GeneratorSet,
    schedule: Schedule,
    spec: NoiseSpec,
    trials: int,
    threads: int = 1,
) -> CampaignResult:
    """
    Run trials 0..trials−1 of the noise model and keep every per-trial measurement.

    Raises:
        ValueError: fewer than MIN_TRIALS trials, or incompatible inputs
        NonFiniteTrialError: a trial produced a non-finite ε
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be at least {MIN_TRIALS}, got {trials}")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")

    factors = schedule_factors(gens, schedule)
    ideal = noiseless_product(factors)
    flow = exact_flow(gens, schedule.total_time)
    logger.info(
        "Campaign: N=%d, ℓ=%d, ε_m=%r, mode=%s, trials=%d", schedule.N, gens.dim, spec.epsilon_m, spec.mode, trials
    )

    batches = _run_chunks(factors, ideal, flow, spec, trials, threads)
    epsilon = np.concatenate([b.epsilon for b in batches])
    bad = np.flatnonzero(~np.isfinite(epsilon))
    if bad.size:
        raise NonFiniteTrialError(f"trial {int(bad[0])} produced a non-finite machine error")

    factor_ratio = np.concatenate([b.factor_ratio.ravel() for b in batches])
    return CampaignResult(
        N=schedule.N,
        dim=gens.dim,
        spec=spec,
        epsilon=epsilon,
        epsilon_net=np.concatenate([b.epsilon_net for b in batches]),
        norm_ratio=np.concatenate([b.norm_ratio for b in batches]),
        factor_error=np.concatenate([b.factor_error.ravel() for b in batches]),
        factor_ratio_std=float(np.std(factor_ratio, ddof=1)) if factor_ratio.size > 1 else 0.0,
        factors_unitary=all(is_unitary(U) for U in factors),
    )


def monte_carlo(
    gens: GeneratorSet,
    schedule: Schedule,
    spec: NoiseSpec,
    trials: int,
    threads: int = 1,
) -> ErrorStats:
    """Summary statistics of the machine error ε over trials 0..trials−1."""
    return run_campaign(gens, schedule, spec, trials, threads).stats


def error_spectrum(U: np.ndarray, spec: NoiseSpec, trials: int) -> np.ndarray:
    """
    Pooled singular values of (Ũ − U) over trials, in units of U's RMS entry magnitude.

    For a matrix whose entries share one magnitude the element errors are
    i.i.d., and these values follow single_factor_norm_pdf.
    """
    U = np.asarray(U, dtype=np.complex128)
    dim = U.shape[0]
    scale = np.linalg.norm(U) / dim
    if scale == 0:
        raise ValueError("error spectrum of a zero matrix is undefined")
    normals = np.stack([trial_normals(spec, t, 1, dim)[0] for t in range(trials)])
    noisy = perturb_stack(np.broadcast_to(U, (trials, dim, dim)), spec, normals)
    return np.linalg.svd((noisy - U) / scale, compute_uv=False).ravel()


# =============================================================================
# REFERENCE DISTRIBUTIONS
# =============================================================================

def _lognormal(N: int, epsilon_m: float):
    if epsilon_m <= 0 or N < 1:
        raise ValueError(f"need N >= 1 and epsilon_m > 0, got N={N}, epsilon_m={epsilon_m}")
    return scipy.stats.lognorm(s=math.sqrt(N) * epsilon_m)


def lognormal_pdf(x, N: int, epsilon_m: float):
    """Density of X = ∏ X_p with ln X ~ N(0, Nε_m²)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("lognormal_pdf is defined for x > 0 only")
    out = _lognormal(N, epsilon_m).pdf(x_arr)
    return float(out) if np.ndim(out) == 0 else out


def folded_lognormal_pdf(eps, N: int, epsilon_m: float):
    """Density of ε = |1 − X| for log-normal X."""
    e = np.asarray(eps, dtype=float)
    dist = _lognormal(N, epsilon_m)
    upper = dist.pdf(1 + np.clip(e, 0, None))
    lower = np.where(e < 1, dist.pdf(np.clip(1 - e, 0, None)), 0.0)
    out = np.where(e <= 0, 0.0, upper + lower)
    return float(out) if np.ndim(out) == 0 else out


def folded_lognormal_cdf(eps, N: int, epsilon_m: float):
    e = np.clip(np.asarray(eps, dtype=float), 0, None)
    dist = _lognormal(N, epsilon_m)
    out = dist.cdf(1 + e) - dist.cdf(np.clip(1 - e, 0, None))
    return float(out) if np.ndim(out) == 0 else out


def single_factor_norm_pdf(x, epsilon_m: float, dim: int):
    """
    Limiting density of one factor's relative norm error x.

    The squared error follows a Marchenko-Pastur law of ratio one; as a
    density in x this is the quarter circle √(4ε_m²ℓ − x²)/(πε_m²ℓ) on
    [0, 2ε_m√ℓ].
    """
    if epsilon_m <= 0 or dim < 1:
        raise ValueError(f"need epsilon_m > 0 and dim >= 1, got {epsilon_m}, {dim}")
    c = epsilon_m**2 * dim
    x_arr = np.asarray(x, dtype=float)
    inside = (x_arr >= 0) & (x_arr <= 2 * math.sqrt(c))
    out = np.where(inside, np.sqrt(np.clip(4 * c - x_arr**2, 0, None)) / (math.pi * c), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def single_factor_norm_cdf(x, epsilon_m: float, dim: int):
    c = epsilon_m**2 * dim
    edge = 2 * math.sqrt(c)
    xc = np.clip(np.asarray(x, dtype=float), 0, edge)
    out = (xc / 2 * np.sqrt(4 * c - xc**2) + 2 * c * np.arcsin(xc / edge)) / (math.pi * c)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def ks_distance(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between samples and a reference CDF."""
    return float(scipy.stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)


def integrate_density(pdf: Callable[[float], float], lower: float, upper: float, points=None) -> float:
    value, _ = scipy.integrate.quad(pdf, lower, upper, points=points, limit=400, epsabs=1e-12, epsrel=1e-10)
    return float(value)


# =============================================================================
# CLOSED-FORM MOMENTS AND BOUNDS
# =============================================================================

def lognormal_product_moments(N: int, epsilon_m: float) -> Tuple[float, float]:
    """(μ(X), σ(X)) of the log-normal product with log-variance Nε_m²."""
    s = N * epsilon_m**2
    return math.exp(s / 2), math.sqrt(math.exp(s) * math.expm1(s))


def gaussian_product_moments(N: int, epsilon_m: float) -> Tuple[float, float]:
    """Exact (μ(X), σ(X)) for a product of N independent N(1, ε_m²) factors."""
    return 1.0, math.sqrt(math.expm1(N * math.log1p(epsilon_m**2)))


def scalar_bounds(N: int, epsilon_m: float) -> Tuple[float, float]:
    """
    Lower bounds on μ(ε) and σ(ε) for the scalar log-normal chain.

    The σ radicand is negative for small Nε_m², where the bound is reported as 0.
    """
    s = N * epsilon_m**2
    mean_lower = math.expm1(s / 2) if s / 2 < LOG_FLOAT_MAX else math.inf
    if 2 * s < LOG_FLOAT_MAX:
        radicand = math.exp(2 * s) - math.exp(s) - 2 * math.exp(s / 2) + 1
        std_lower = math.sqrt(radicand) if radicand > 0 else 0.0
    elif s < LOG_FLOAT_MAX:
        std_lower = math.exp(s) * math.sqrt(1 - math.exp(-s) - 2 * math.exp(-1.5 * s) + math.exp(-2 * s))
    else:
        std_lower = math.inf
    return mean_lower, std_lower


def required_machine_epsilon(epsilon_t: float, N: int, dim: int) -> float:
    """Largest ε_m for which the linear bound keeps σ(ε) below ε_t."""
    if epsilon_t <= 0 or N < 1 or dim < 1:
        raise ValueError(f"need epsilon_t > 0, N >= 1, dim >= 1; got {epsilon_t}, {N}, {dim}")
    return epsilon_t / (N * math.sqrt(dim) * STABILITY_CONSTANT)


@dataclass(frozen=True)
class BoundReport:
    """Analytic bounds for one (N, ℓ, ε_m, ε_t). Overflowing values are +inf."""

    N: int
    dim: int
    epsilon_m: float
    epsilon_t: Optional[float]
    thm2_lower: float
    thm3_upper: float
    cor5_upper: float
    cor4_epsilon_m: Optional[float]
    scalar_mean_lower: float
    scalar_std_lower: float
    lemma1_lower: float
    lemma1_upper: float
    lemma1_support: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def theorem_bounds(N: int, dim: int, epsilon_m: float, epsilon_t: Optional[float] = None) -> BoundReport:
    """Evaluate every closed-form bound; the exponential lower bound is taken through log space."""
    if N < 1 or dim < 1 or epsilon_m < 0:
        raise ValueError(f"need N >= 1, dim >= 1, epsilon_m >= 0; got {N}, {dim}, {epsilon_m}")

    if epsilon_m == 0:
        thm2 = 0.0
    else:
        log_thm2 = math.log(N) + (N - 1) / 2 * math.log(dim) + math.log(epsilon_m)
        thm2 = math.exp(log_thm2) if log_thm2 < LOG_FLOAT_MAX else math.inf

    mean_lower, std_lower = scalar_bounds(N, epsilon_m)
    return BoundReport(
        N=N,
        dim=dim,
        epsilon_m=epsilon_m,
        epsilon_t=epsilon_t,
        thm2_lower=thm2,
        thm3_upper=N * epsilon_m * STABILITY_CONSTANT,
        cor5_upper=N * epsilon_m * math.sqrt(dim),
        cor4_epsilon_m=required_machine_epsilon(epsilon_t, N, dim) if epsilon_t is not None else None,
        scalar_mean_lower=mean_lower,
        scalar_std_lower=std_lower,
        lemma1_lower=epsilon_m,
        lemma1_upper=epsilon_m * math.sqrt(dim),
        lemma1_support=2 * epsilon_m * math.sqrt(dim),
    )


# =============================================================================
# VERDICTS
# =============================================================================

def _upper(value: float, stderr: float, bound: float) -> Verdict:
    return "satisfied" if value - SLACK_STDERRS * stderr <= bound else "violated"


def _lower(value: float, stderr: float, bound: float) -> Verdict:
    return "satisfied" if value + SLACK_STDERRS * stderr >= bound else "violated"


def evaluate_verdicts(result: CampaignResult, bounds: BoundReport) -> Dict[str, Verdict]:
    """Check each bound whose premise the campaign meets."""
    stats = result.stats
    mode = result.spec.mode
    verdicts: Dict[str, Verdict] = {"thm2_lower": "not-applicable"}

    verdicts["thm3_upper"] = (
        _upper(stats.std, stats.std_stderr, bounds.thm3_upper) if result.norm_condition_holds else "not-applicable"
    )
    verdicts["cor5_upper"] = (
        _upper(stats.std, stats.std_stderr, bounds.cor5_upper)
        if mode == "gaussian_unitary" and result.factors_unitary
        else "not-applicable"
    )
    if (
        bounds.epsilon_t is not None
        and result.norm_condition_holds
        and bounds.epsilon_m <= bounds.cor4_epsilon_m * (1 + 1e-12)
    ):
        verdicts["cor4_budget"] = _upper(stats.std, stats.std_stderr, bounds.epsilon_t)
    else:
        verdicts["cor4_budget"] = "not-applicable"

    if result.dim == 1 and mode == "lognormal" and result.spec.epsilon_m > 0:
        verdicts["scalar_mean_lower"] = _lower(stats.mean, stats.mean_stderr, bounds.scalar_mean_lower)
        verdicts["scalar_std_lower"] = _lower(stats.std, stats.std_stderr, bounds.scalar_std_lower)
    else:
        verdicts["scalar_mean_lower"] = "not-applicable"
        verdicts["scalar_std_lower"] = "not-applicable"
    return verdicts


# =============================================================================
# GROWTH TRENDS
# =============================================================================

@dataclass(frozen=True)
class GrowthFit:
    """Winning trend model; rate is the slope (linear) or exponent b (exponential)."""

    model: Literal["linear", "exponential"]
    rate: float
    r_squared: float
    intercept: float = 0.0
    alternative_r_squared: Optional[float] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fitted) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return min(1.0, max(0.0, 1.0 - ss_res / ss_tot))


def _fit_exponential(n: np.ndarray, y: np.ndarray) -> Optional[Tuple[float, float, float]]:
    """(a, b, r²) of σ = a·e^{b(N − N̄)}, or None when σ has non-positive entries."""
    if np.any(y <= 0):
        return None
    center = n.mean()
    b0, log_a0 = np.polyfit(n - center, np.log(y), 1)

    def model(x, a, b):
        return a * np.exp(b * (x - center))

    try:
        (a, b), _ = scipy.optimize.curve_fit(model, n, y, p0=(math.exp(log_a0), b0), maxfev=10000)
    except RuntimeError:
        a, b = math.exp(log_a0), b0
    return float(a), float(b), _r_squared(y, model(n, a, b))


def fit_growth(points: Sequence[Tuple[float, float]]) -> GrowthFit:
    """
    Classify σ(N) as linear (σ = a·N + c) or exponential (σ ∝ e^{bN}).

    Both fits are scored by r² on σ itself; ties go to linear.
    """
    if len(points) < 4:
        raise ValueError(f"fit_growth needs at least 4 points, got {len(points)}")
    n = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(np.diff(n) <= 0):
        raise ValueError("N values must be strictly increasing")
    if np.ptp(y) == 0:
        return GrowthFit("linear", 0.0, 1.0, float(y[0]))

    slope, intercept = np.polyfit(n, y, 1)
    r2_linear = _r_squared(y, slope * n + intercept)
    exp_fit = _fit_exponential(n, y)

    if exp_fit is not None and exp_fit[2] > r2_linear:
        a, b, r2_exp = exp_fit
        return GrowthFit("exponential", b, r2_exp, a * math.exp(-b * n.mean()), r2_linear)
    return GrowthFit("linear", float(slope), r2_linear, float(intercept), exp_fit[2] if exp_fit else None)
