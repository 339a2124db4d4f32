"""
Trotter and recursive Suzuki product formulas.

A schedule is materialized as a flat list of (generator index, coefficient)
terms first; matrices only enter at evaluation time.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Literal, Sequence, Tuple, get_args

import numpy as np

from .matrix_core import GeneratorSet, mat_exp, relative_distance

logger = logging.getLogger(__name__)

OrderKind = Literal["trotter", "suzuki", "custom"]
ORDER_KINDS = get_args(OrderKind)

Term = Tuple[int, float]


# =============================================================================
# ORDER SPECS AND SCHEDULES
# =============================================================================

@dataclass(frozen=True)
class OrderSpec:
    """
    Which product formula to build.

    k is the half-order of the Suzuki formula (order 2k); k = 1 is the
    symmetric second-order base case. Trotter ignores k.
    """

    kind: OrderKind
    k: int = 1
    r: int = 1

    def __post_init__(self):
        if self.kind not in ORDER_KINDS:
            raise ValueError(f"Invalid order kind '{self.kind}'. Must be one of: {', '.join(ORDER_KINDS)}")
        if int(self.r) < 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if self.kind == "suzuki" and int(self.k) < 1:
            raise ValueError(f"Suzuki half-order k must be at least 1, got {self.k}")

    @classmethod
    def from_order(cls, order: int, r: int = 1) -> "OrderSpec":
        """Map a user-facing order (1 or an even number) to a spec."""
        order = int(order)
        if order == 1:
            return cls("trotter", r=r)
        if order >= 2 and order % 2 == 0:
            return cls("suzuki", k=order // 2, r=r)
        raise ValueError(f"order must be 1 (Trotter) or an even number (Suzuki), got {order}")

    @property
    def order(self) -> int:
        return {"trotter": 1, "suzuki": 2 * self.k, "custom": 0}[self.kind]

    @property
    def half_order(self) -> int:
        """k for Suzuki schedules, 0 otherwise."""
        return self.k if self.kind == "suzuki" else 0

    def with_r(self, r: int) -> "OrderSpec":
        return OrderSpec(self.kind, self.k, r)

    def block_terms(self, m: int) -> int:
        """Number of raw terms in one λ/r segment."""
        if self.kind == "trotter":
            return m
        if self.kind == "suzuki":
            return 2 * m * 5 ** (self.k - 1)
        raise ValueError("custom schedules have no fixed block size")

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "suzuki":
            return {"kind": self.kind, "k": self.k, "r": self.r}
        return {"kind": self.kind, "r": self.r}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OrderSpec":
        return cls(data["kind"], int(data.get("k", 1)), int(data.get("r", 1)))


@dataclass(frozen=True)
class CostCount:
    raw_exponentials: int
    merged_exponentials: int

    def to_dict(self) -> Dict[str, int]:
        return {"raw_exponentials": self.raw_exponentials, "merged_exponentials": self.merged_exponentials}


@dataclass(frozen=True)
class Schedule:
    """Ordered (generator index, coefficient) terms; term p = 1 acts first."""

    m: int
    order_spec: OrderSpec
    total_time: float
    terms: Tuple[Term, ...]
    merged: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be at least 1, got {self.m}")
        if not math.isfinite(self.total_time):
            raise ValueError(f"total time must be finite, got {self.total_time}")
        terms = tuple((int(j), float(c)) for j, c in self.terms)
        for j, c in terms:
            if not 1 <= j <= self.m:
                raise ValueError(f"generator index {j} outside 1..{self.m}")
            if not math.isfinite(c):
                raise ValueError(f"coefficient {c} for generator {j} is not finite")
        object.__setattr__(self, "terms", terms)

    @property
    def N(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> List[float]:
        return [c for _, c in self.terms]

    def generator_sums(self) -> List[float]:
        """Σ λ_p over the terms of each generator, in index order."""
        return [math.fsum(c for j, c in self.terms if j == idx) for idx in range(1, self.m + 1)]

    def is_palindromic(self) -> bool:
        return self.terms == self.terms[::-1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "order_spec": self.order_spec.to_dict(),
            "lambda": self.total_time,
            "merged": self.merged,
            "terms": [[j, c] for j, c in self.terms],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Schedule":
        try:
            return cls(
                m=int(data["m"]),
                order_spec=OrderSpec.from_dict(data["order_spec"]),
                total_time=float(data["lambda"]),
                terms=tuple((int(j), float(c)) for j, c in data["terms"]),
                merged=bool(data.get("merged", False)),
            )
        except (KeyError, TypeError) as e:
            raise ValueError(f"Malformed schedule document: {e}") from e


# =============================================================================
# CONSTRUCTION
# =============================================================================

def suzuki_coefficient(k: int) -> float:
    """p_k = 1 / (4 − 4^{1/(2k−1)}), the weight of the four outer sub-steps."""
    if int(k) != k or k < 2:
        raise ValueError(f"suzuki_coefficient needs an integer k >= 2, got {k}")
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def _suzuki_block(m: int, k: int, lam: float) -> List[Term]:
    if k == 1:
        half = lam / 2
        forward = [(j, half) for j in range(1, m + 1)]
        return forward + forward[::-1]
    p = suzuki_coefficient(k)
    outer = _suzuki_block(m, k - 1, p * lam)
    inner = _suzuki_block(m, k - 1, (1 - 4 * p) * lam)
    return outer + outer + inner + outer + outer


def merge_terms(terms: Iterable[Term]) -> List[Term]:
    """Combine runs of adjacent terms that share a generator index."""
    merged: List[Term] = []
    run: List[float] = []
    current = None
    for j, c in terms:
        if j != current and run:
            merged.append((current, math.fsum(run)))
            run = []
        current = j
        run.append(c)
    if run:
        merged.append((current, math.fsum(run)))
    return merged


def build_schedule(m: int, spec: OrderSpec, lam: float, merge: bool = False) -> Schedule:
    """
    Flatten a Trotter or Suzuki product formula into its term list.

    The formula is built for one segment of length λ/r and repeated r times.
    With merge set, adjacent terms on the same generator are combined.
    """
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m}")
    if not math.isfinite(lam):
        raise ValueError(f"λ must be finite, got {lam}")

    segment = lam / spec.r
    if spec.kind == "trotter":
        block = [(j, segment) for j in range(1, m + 1)]
    elif spec.kind == "suzuki":
        block = _suzuki_block(m, spec.k, segment)
    else:
        raise ValueError("custom schedules are built with custom_schedule()")

    terms = block * spec.r
    if merge:
        terms = merge_terms(terms)
    logger.debug("Built %s schedule: m=%d, N=%d, merged=%s", spec.kind, m, len(terms), merge)
    return Schedule(m, spec, float(lam), tuple(terms), merge)


def custom_schedule(m: int, terms: Sequence[Term], total_time: float, merge: bool = False) -> Schedule:
    """Schedule from an explicit term list, e.g. one loaded from a schedule file."""
    terms = list(terms)
    if merge:
        terms = merge_terms(terms)
    return Schedule(m, OrderSpec("custom"), float(total_time), tuple(terms), merge)


def exponential_count(schedule: Schedule) -> CostCount:
    spec = schedule.order_spec
    if spec.kind == "custom":
        raw = schedule.N
    else:
        raw = spec.block_terms(schedule.m) * spec.r
    return CostCount(raw, len(merge_terms(schedule.terms)))


# =============================================================================
# EVALUATION
# =============================================================================

def _check_compatible(gens: GeneratorSet, schedule: Schedule) -> None:
    if gens.m != schedule.m:
        raise ValueError(f"Generator set has m={gens.m} but schedule expects m={schedule.m}")


def schedule_factors(gens: GeneratorSet, schedule: Schedule) -> np.ndarray:
    """Exact factors e^{A_{j_p} λ_p} stacked as an (N, ℓ, ℓ) array, p = 1 first."""
    _check_compatible(gens, schedule)
    cache: Dict[Term, np.ndarray] = {}
    factors = np.empty((schedule.N, gens.dim, gens.dim), dtype=np.complex128)
    for p, (j, c) in enumerate(schedule.terms):
        if (j, c) not in cache:
            cache[(j, c)] = mat_exp(gens.generators[j - 1] * c)
        factors[p] = cache[(j, c)]
    return factors


def ordered_product(factors: np.ndarray) -> np.ndarray:
    """U_N ··· U_2 U_1 for factors stacked along axis -3 (leading axes are batch axes)."""
    result = factors[..., 0, :, :]
    for p in range(1, factors.shape[-3]):
        result = factors[..., p, :, :] @ result
    return result


def evaluate_schedule(gens: GeneratorSet, schedule: Schedule) -> np.ndarray:
    if schedule.N == 0:
        return np.eye(gens.dim, dtype=np.complex128)
    return ordered_product(schedule_factors(gens, schedule))


def exact_flow(gens: GeneratorSet, lam: float) -> np.ndarray:
    """e^{(Σ_j A_j) λ}."""
    return mat_exp(gens.total() * lam)


def ideal_error(gens: GeneratorSet, lam: float, schedule: Schedule) -> float:
    """Relative spectral distance between the exact flow and the noiseless product."""
    _check_compatible(gens, schedule)
    return relative_distance(exact_flow(gens, lam), evaluate_schedule(gens, schedule))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log slope needs at least two positive points")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
