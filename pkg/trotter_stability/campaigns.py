"""
Campaign configuration and runners.

A CampaignConfig describes where the generators come from, which product
formula to build, the noise model and the sweep axes. The runners here turn
a config into plain results (dataclasses and DataFrames); writing files is
left to the front ends.
"""

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml

from .matrix_core import GeneratorSet, spectral_norm
from .models import (
    HubbardParams,
    echo_family,
    echo_schedule,
    enumerate_lattice_terms,
    hubbard_bond_generators,
    hubbard_cost,
    hubbard_machine_epsilon,
    hubbard_term_matrix,
    pauli_pair,
    random_family,
    scalar_family,
)
from .noise_model import NoiseSpec
from .product_formula import (
    CostCount,
    OrderSpec,
    Schedule,
    build_schedule,
    exponential_count,
    ideal_error,
    loglog_slope,
)
from .stability_analysis import (
    STABILITY_CONSTANT,
    BoundReport,
    CampaignResult,
    GrowthFit,
    Verdict,
    error_spectrum,
    evaluate_verdicts,
    fit_growth,
    folded_lognormal_cdf,
    ks_distance,
    lognormal_product_moments,
    required_machine_epsilon,
    run_campaign,
    scalar_bounds,
    single_factor_norm_cdf,
    summarize,
    theorem_bounds,
)

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

SOURCE_KINDS = ("synthetic", "scalar", "echo", "pauli", "hubbard")
SWEEP_AXES = ("dim", "N", "epsilon_m", "lambda", "order", "r")
NOISE_SIM_AXES = ("dim", "N", "epsilon_m")
IDEAL_ERROR_AXES = ("lambda", "r", "order")
COMMANDS = ("noise-sim", "ideal-error", "hubbard")
CONFIG_KEYS = {
    "name",
    "description",
    "command",
    "source",
    "order",
    "r",
    "lambda",
    "merge",
    "N",
    "noise",
    "trials",
    "threads",
    "epsilon_t",
    "sweep",
    "out",
}
DEFAULT_OUTPUT_DIR = Path("runs")


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class CampaignConfig:
    """One campaign: generator source, product formula, noise model and sweeps."""

    source: Dict[str, Any] = field(default_factory=lambda: {"kind": "pauli"})
    order: int = 2
    r: int = 1
    lam: float = 1.0
    merge: bool = False
    N: Optional[int] = None
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(0.0))
    epsilon_m_from_budget: bool = False
    trials: int = 1000
    threads: int = 1
    epsilon_t: Optional[float] = None
    sweep: Dict[str, Tuple[Any, ...]] = field(default_factory=dict)
    out: Path = DEFAULT_OUTPUT_DIR
    name: str = "campaign"
    description: str = ""
    command: str = "noise-sim"

    def __post_init__(self):
        kind = self.source.get("kind")
        if kind not in SOURCE_KINDS:
            raise ValueError(f"Invalid source kind '{kind}'. Must be one of: {', '.join(SOURCE_KINDS)}")
        if self.command not in COMMANDS:
            raise ValueError(f"Invalid command '{self.command}'. Must be one of: {', '.join(COMMANDS)}")
        if self.trials < 1 or self.threads < 1:
            raise ValueError(f"trials and threads must be positive, got {self.trials}, {self.threads}")
        if self.epsilon_m_from_budget and self.epsilon_t is None:
            raise ValueError("epsilon_m: budget needs epsilon_t")
        for axis, values in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise ValueError(f"Invalid sweep axis '{axis}'. Must be one of: {', '.join(SWEEP_AXES)}")
            if len(values) == 0:
                raise ValueError(f"sweep axis '{axis}' must be a non-empty list")
        OrderSpec.from_order(self.order, self.r)

    def to_dict(self) -> Dict[str, Any]:
        noise = self.noise.to_dict()
        if self.epsilon_m_from_budget:
            noise["epsilon_m"] = "budget"
        data = {
            "name": self.name,
            "command": self.command,
            "source": dict(self.source),
            "order": self.order,
            "r": self.r,
            "lambda": self.lam,
            "merge": self.merge,
            "noise": noise,
            "trials": self.trials,
            "sweep": {axis: list(values) for axis, values in self.sweep.items()},
        }
        if self.N is not None:
            data["N"] = self.N
        if self.epsilon_t is not None:
            data["epsilon_t"] = self.epsilon_t
        return data

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "CampaignConfig":
        if not isinstance(data, dict):
            raise ValueError("config must be a mapping")
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        if "source" not in data or not isinstance(data["source"], dict):
            raise ValueError("config needs a 'source' mapping with a 'kind'")

        noise = dict(data.get("noise") or {})
        from_budget = noise.get("epsilon_m") == "budget"
        if from_budget:
            noise["epsilon_m"] = 0.0
        noise.setdefault("epsilon_m", 0.0)
        sweep = data.get("sweep") or {}
        if not isinstance(sweep, dict):
            raise ValueError("sweep must be a mapping of axis -> list")

        try:
            return cls(
                source=dict(data["source"]),
                order=int(data.get("order", 2)),
                r=int(data.get("r", 1)),
                lam=float(data.get("lambda", 1.0)),
                merge=bool(data.get("merge", False)),
                N=int(data["N"]) if data.get("N") is not None else None,
                noise=NoiseSpec.from_dict(noise),
                epsilon_m_from_budget=from_budget,
                trials=int(data.get("trials", 1000)),
                threads=int(data.get("threads", 1)),
                epsilon_t=float(data["epsilon_t"]) if data.get("epsilon_t") is not None else None,
                sweep={axis: tuple(values) for axis, values in sweep.items()},
                out=Path(data.get("out", DEFAULT_OUTPUT_DIR)),
                name=str(data.get("name", "campaign")),
                description=str(data.get("description", "")),
                command=str(data.get("command", "noise-sim")),
            )
        except (TypeError, KeyError) as e:
            raise ValueError(f"Malformed config: {e}") from e


def load_config(path: Path) -> CampaignConfig:
    """Read a JSON or YAML campaign file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f"Could not parse {path}: {e}") from e
    return CampaignConfig.from_mapping(data or {})


def apply_overrides(config: CampaignConfig, **overrides: Any) -> CampaignConfig:
    """Command-line values win over the file; None means 'not given'."""
    changes = {}
    seed = overrides.pop("seed", None)
    if seed is not None:
        changes["noise"] = dataclasses.replace(config.noise, master_seed=seed)
    for key, value in overrides.items():
        if value is not None:
            changes[key] = value
    return dataclasses.replace(config, **changes) if changes else config


# =============================================================================
# GENERATORS AND SCHEDULES
# =============================================================================

def hubbard_params(source: Dict[str, Any]) -> HubbardParams:
    return HubbardParams.from_dict(
        {
            "t_H": source.get("t_H", 1.0),
            "U_H": source.get("U_H", 2.0),
            "eta": source.get("eta", 2),
            "sim_time": source.get("sim_time", 1.0),
            "epsilon_t": source.get("epsilon_t", 1e-3),
            "boundary": source.get("boundary", "periodic"),
        }
    )


def build_generators(config: CampaignConfig, dim: Optional[int] = None) -> GeneratorSet:
    src = config.source
    kind = src["kind"]
    if kind == "synthetic":
        return random_family(
            dim or int(src.get("dim", 2)),
            int(src.get("m", 2)),
            src.get("class", "hermitian"),
            float(src.get("norm", 1.0)),
            int(src.get("seed", 0)),
        )
    if kind == "scalar":
        return scalar_family(float(src.get("rate", 0.0)))
    if kind == "echo":
        return echo_family(dim or int(src.get("dim", 4)), float(src.get("growth", 1.2)), int(src.get("seed", 0)))
    if kind == "pauli":
        return pauli_pair(bool(src.get("real_time", True)))
    params = hubbard_params(src)
    return hubbard_bond_generators(params.t_H, params.U_H, src.get("time_kind", "real"))


def build_point_schedule(
    config: CampaignConfig,
    gens: GeneratorSet,
    N: Optional[int] = None,
    order: Optional[int] = None,
    r: Optional[int] = None,
    lam: Optional[float] = None,
) -> Schedule:
    """
    Schedule for one grid point.

    A requested factor count N fixes r = N / (terms per segment) and must
    divide evenly. Echo sources build their forward/backward schedule from N.
    """
    N = N if N is not None else config.N
    if config.source["kind"] == "echo":
        if N is None:
            raise ValueError("echo sources need N")
        return echo_schedule(N)

    if lam is None:
        lam = hubbard_params(config.source).sim_time if config.source["kind"] == "hubbard" else config.lam
    spec = OrderSpec.from_order(order if order is not None else config.order, r if r is not None else config.r)
    if N is not None:
        block = spec.block_terms(gens.m)
        if N % block:
            raise ValueError(f"N={N} is not a multiple of the {block} terms per segment")
        spec = spec.with_r(N // block)
    return build_schedule(gens.m, spec, lam, config.merge)


def grid(config: CampaignConfig, axes: Sequence[str], command: str) -> List[Dict[str, Any]]:
    """
    Cartesian product of the swept axes, in the listed axis order.

    Raises:
        ValueError: the config sweeps an axis that `command` does not expand
    """
    unused = [a for a in config.sweep if a not in axes]
    if unused:
        allowed = ", ".join(axes) if axes else "none"
        raise ValueError(f"{command} cannot sweep {', '.join(unused)} (sweepable axes: {allowed})")
    swept = [a for a in axes if a in config.sweep]
    return [dict(zip(swept, values)) for values in itertools.product(*(config.sweep[a] for a in swept))]


def schedule_document(config: CampaignConfig) -> Tuple[Schedule, CostCount]:
    grid(config, (), "schedule")
    gens = build_generators(config)
    schedule = build_point_schedule(config, gens)
    return schedule, exponential_count(schedule)


# =============================================================================
# IDEAL ERROR
# =============================================================================

def ideal_error_table(config: CampaignConfig) -> pd.DataFrame:
    """One row per (λ, r, order) point: lambda, r, k, ideal_error."""
    gens = build_generators(config)
    rows = []
    for point in grid(config, IDEAL_ERROR_AXES, "ideal-error"):
        lam = float(point.get("lambda", config.lam))
        schedule = build_point_schedule(config, gens, order=point.get("order"), r=point.get("r"), lam=lam)
        rows.append(
            {
                "lambda": lam,
                "r": schedule.order_spec.r,
                "k": schedule.order_spec.half_order,
                "ideal_error": ideal_error(gens, lam, schedule),
            }
        )
    return pd.DataFrame(rows, columns=["lambda", "r", "k", "ideal_error"])


# =============================================================================
# NOISE CAMPAIGNS
# =============================================================================

@dataclass(frozen=True, eq=False)
class PointOutcome:
    dim: int
    result: CampaignResult
    bounds: BoundReport
    verdicts: Dict[str, Verdict]

    @property
    def N(self) -> int:
        return self.result.N

    @property
    def epsilon_m(self) -> float:
        return self.result.spec.epsilon_m

    @property
    def label(self) -> str:
        return f"dim{self.dim}_N{self.N}_eps{self.epsilon_m!r}"

    def trial_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "trial": np.arange(len(self.result.epsilon)),
                "epsilon": self.result.epsilon,
                "epsilon_net": self.result.epsilon_net,
            }
        )

    def summary(self) -> Dict[str, Any]:
        stats = self.result.stats
        ratio = summarize(self.result.norm_ratio)
        return {
            "N": self.N,
            "dim": self.dim,
            "epsilon_m": self.epsilon_m,
            "mode": self.result.spec.mode,
            **stats.to_dict(),
            "net": self.result.net_stats.to_dict(),
            "norm_ratio": {"mean": ratio.mean, "std": ratio.std},
            "factor_error_rms": self.result.factor_error_rms,
            "factor_ratio_std": self.result.factor_ratio_std,
            "norm_condition_holds": self.result.norm_condition_holds,
            "bounds": self.bounds.to_dict(),
            "verdicts": self.verdicts,
        }


@dataclass(frozen=True, eq=False)
class NoiseSimOutcome:
    config: CampaignConfig
    points: List[PointOutcome]
    growth: Dict[str, GrowthFit]

    def sweep_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.points:
            stats = p.result.stats
            rows.append(
                {
                    "dim": p.dim,
                    "N": p.N,
                    "epsilon_m": p.epsilon_m,
                    "mean": stats.mean,
                    "std": stats.std,
                    "mean_stderr": stats.mean_stderr,
                    "std_stderr": stats.std_stderr,
                    "thm3_upper": p.bounds.thm3_upper,
                    "cor5_upper": p.bounds.cor5_upper,
                }
            )
        return pd.DataFrame(rows)

    def summary(self) -> Dict[str, Any]:
        if len(self.points) == 1:
            return {"config": self.config.to_dict(), **self.points[0].summary()}
        return {
            "config": self.config.to_dict(),
            "points": [p.summary() for p in self.points],
            "growth": {key: fit.to_dict() for key, fit in self.growth.items()},
        }


def run_point(
    config: CampaignConfig,
    dim: Optional[int] = None,
    N: Optional[int] = None,
    epsilon_m: Optional[float] = None,
) -> PointOutcome:
    gens = build_generators(config, dim)
    schedule = build_point_schedule(config, gens, N=N)
    if config.epsilon_m_from_budget:
        epsilon_m = required_machine_epsilon(config.epsilon_t, schedule.N, gens.dim)
    spec = config.noise.with_epsilon(epsilon_m if epsilon_m is not None else config.noise.epsilon_m)

    result = run_campaign(gens, schedule, spec, config.trials, config.threads)
    bounds = theorem_bounds(schedule.N, gens.dim, spec.epsilon_m, config.epsilon_t)
    return PointOutcome(gens.dim, result, bounds, evaluate_verdicts(result, bounds))


def noise_campaign(config: CampaignConfig) -> NoiseSimOutcome:
    """Run every (dim, N, ε_m) point and fit σ(N) per (dim, ε_m) when N is swept."""
    points = []
    for point in grid(config, NOISE_SIM_AXES, "noise-sim"):
        logger.info("Point %s", point or "(single)")
        points.append(run_point(config, point.get("dim"), point.get("N"), point.get("epsilon_m")))

    growth: Dict[str, GrowthFit] = {}
    if len(config.sweep.get("N", ())) >= 4:
        groups: Dict[str, List[PointOutcome]] = {}
        for p in points:
            groups.setdefault(f"dim{p.dim}_eps{p.epsilon_m!r}", []).append(p)
        for key, members in groups.items():
            members = sorted(members, key=lambda p: p.N)
            growth[key] = fit_growth([(p.N, p.result.stats.std) for p in members])
    return NoiseSimOutcome(config, points, growth)


# =============================================================================
# CLOSED FORMS
# =============================================================================

def hubbard_report(params: HubbardParams, m: Optional[int] = None) -> Dict[str, Any]:
    """Term matrix, τ, cost and machine-epsilon budget; m defaults to the bond count."""
    edges = enumerate_lattice_terms(params.eta, params.boundary)
    m = m if m is not None else len(edges)
    tau = params.tau
    cost = hubbard_cost(params.eta, tau, m, params.epsilon_t)
    budget = hubbard_machine_epsilon(params.epsilon_t, params.eta, tau, m)
    exponent = 2 * math.sqrt(math.log(5) * math.log(m * tau / params.epsilon_t))
    reconstructed = budget * 4 * params.eta**4 * tau * math.exp(exponent) * STABILITY_CONSTANT
    return {
        "params": params.to_dict(),
        "m": m,
        "term_matrix": hubbard_term_matrix(params.t_H, params.U_H).real.tolist(),
        "tau": tau,
        "N_exp": cost,
        "epsilon_m_budget": budget,
        "edge_count": len(edges),
        "cross_check_relative_error": abs(reconstructed - params.epsilon_t) / params.epsilon_t,
    }


# =============================================================================
# REPRODUCTION CHECKS
# =============================================================================

def _check(name: str, passed: bool, **detail: Any) -> Dict[str, Any]:
    return {"check": name, "passed": bool(passed), **detail}


def check_scalar_chain(outcome: NoiseSimOutcome) -> List[Dict[str, Any]]:
    """Log-normal moments, lower bounds and folded log-normal shape of the scalar chain."""
    p = outcome.points[0]
    N, eps = p.N, p.epsilon_m
    x = summarize(p.result.norm_ratio)
    mu_x, sigma_x = lognormal_product_moments(N, eps)
    stats = p.result.stats
    mean_lower, std_lower = scalar_bounds(N, eps)
    ks = ks_distance(p.result.epsilon, lambda e: folded_lognormal_cdf(e, N, eps))
    return [
        _check("mean_of_X", abs(x.mean - mu_x) <= 0.01 * mu_x, sample=x.mean, expected=mu_x),
        _check("std_of_X", abs(x.std - sigma_x) <= 0.03 * sigma_x, sample=x.std, expected=sigma_x),
        _check("mean_lower", stats.mean + 3 * stats.mean_stderr >= mean_lower, sample=stats.mean, bound=mean_lower),
        _check("std_lower", stats.std + 3 * stats.std_stderr >= std_lower, sample=stats.std, bound=std_lower),
        _check("folded_lognormal_ks", ks <= 0.02, ks=ks),
    ]


def check_factor_corridor(outcome: NoiseSimOutcome) -> List[Dict[str, Any]]:
    """
    Per-factor relative norm error stays inside [ε_m, ε_m√ℓ]; at the largest
    dimension it also stays below the support edge and the singular values of
    the error follow the quarter-circle law.
    """
    checks = []
    for p in outcome.points:
        value = p.result.factor_error_rms
        low, high = 0.9 * p.bounds.lemma1_lower, 1.1 * p.bounds.lemma1_upper
        checks.append(_check(f"corridor_dim{p.dim}", low <= value <= high, rms=value, lower=low, upper=high))

    largest = max(outcome.points, key=lambda p: p.dim)
    edge = 1.1 * largest.bounds.lemma1_support
    q99 = float(np.quantile(largest.result.factor_error, 0.99))
    checks.append(_check(f"support_dim{largest.dim}", q99 <= edge, quantile_99=q99, edge=edge))

    flat = np.ones((largest.dim, largest.dim))
    values = error_spectrum(flat, largest.result.spec, min(outcome.config.trials, 200))
    ks = ks_distance(values, lambda x: single_factor_norm_cdf(x, largest.epsilon_m, largest.dim))
    checks.append(_check(f"singular_value_ks_dim{largest.dim}", ks <= 0.05, ks=ks))
    return checks


def check_growth(expected: str) -> Callable[[NoiseSimOutcome], List[Dict[str, Any]]]:
    def run(outcome: NoiseSimOutcome) -> List[Dict[str, Any]]:
        checks = []
        for key, fit in outcome.growth.items():
            passed = fit.model == expected
            if expected == "exponential":
                passed = passed and fit.rate > 0 and fit.r_squared >= 0.95
            checks.append(_check(f"growth_{key}", passed, **fit.to_dict()))
        return checks

    return run


def check_upper_bounds(names: Sequence[str]) -> Callable[[NoiseSimOutcome], List[Dict[str, Any]]]:
    def run(outcome: NoiseSimOutcome) -> List[Dict[str, Any]]:
        return [
            _check(f"{name}_{p.label}", p.verdicts[name] == "satisfied", verdict=p.verdicts[name])
            for p in outcome.points
            for name in names
        ]

    return run


def check_order_scaling(table: pd.DataFrame) -> List[Dict[str, Any]]:
    """Log-log slope 2k+1 per Suzuki order; Trotter error halves when r doubles."""
    checks = []
    suzuki = table[table["k"] > 0]
    for k, rows in suzuki.groupby("k"):
        if rows["lambda"].nunique() >= 2:
            slope = loglog_slope(rows["lambda"], rows["ideal_error"])
            checks.append(_check(f"slope_k{k}", abs(slope - (2 * k + 1)) <= 0.3, slope=slope, expected=2 * k + 1))
    trotter = table[table["k"] == 0].sort_values("r")
    errors = trotter["ideal_error"].to_numpy()
    for r, a, b in zip(trotter["r"].to_numpy()[:-1], errors[:-1], errors[1:]):
        checks.append(_check(f"trotter_refinement_r{r}", 1.6 <= a / b <= 2.4, ratio=a / b))
    return checks


def check_hubbard(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    params = report["params"]
    t, u = params["t_H"], params["U_H"]
    # basis |↑,↓⟩, |↓,↑⟩, |↑↓,•⟩, |•,↑↓⟩
    expected = np.array(
        [
            [0.0, 0.0, -t, -t],
            [0.0, 0.0, t, t],
            [-t, t, u, 0.0],
            [-t, t, 0.0, u],
        ]
    )
    reported = np.asarray(report["term_matrix"], dtype=float)
    return [
        _check("term_matrix", reported.shape == expected.shape and np.array_equal(reported, expected)),
        _check("term_norm", spectral_norm(reported) <= 2 * abs(t) + abs(u) + 1e-12),
        _check(
            "cross_check",
            report["cross_check_relative_error"] <= 1e-12,
            relative_error=report["cross_check_relative_error"],
        ),
    ]


NOISE_CHECKS: Dict[str, Callable[[NoiseSimOutcome], List[Dict[str, Any]]]] = {
    "scalar_chain": check_scalar_chain,
    "factor_corridor": check_factor_corridor,
    "instability_echo": check_growth("exponential"),
    "unitary_linear": lambda o: check_upper_bounds(["cor5_upper", "thm3_upper"])(o) + check_growth("linear")(o),
    "norm_stabilized": check_upper_bounds(["thm3_upper"]),
    "budget": check_upper_bounds(["cor4_budget"]),
}
