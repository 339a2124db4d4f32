"""
Generator families for experiments.

The Hubbard bond term with its cost and precision budget, and small
synthetic families used by the stability campaigns.
"""

import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Literal, Tuple, get_args

import numpy as np
import scipy.stats

from .matrix_core import GeneratorSet, RngStream, sample_generator_set
from .noise_model import SAMPLING_STREAM
from .product_formula import Schedule, custom_schedule
from .stability_analysis import STABILITY_CONSTANT

Boundary = Literal["open", "periodic"]
BOUNDARIES = get_args(Boundary)
TimeKind = Literal["real", "imaginary"]

LN5 = math.log(5)


# =============================================================================
# HUBBARD MODEL
# =============================================================================

@dataclass(frozen=True)
class HubbardParams:
    t_H: float
    U_H: float
    eta: int
    sim_time: float
    epsilon_t: float
    boundary: Boundary = "periodic"

    def __post_init__(self):
        if int(self.eta) < 2:
            raise ValueError(f"eta must be at least 2, got {self.eta}")
        if not self.epsilon_t > 0:
            raise ValueError(f"epsilon_t must be positive, got {self.epsilon_t}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"Invalid boundary '{self.boundary}'. Must be one of: {', '.join(BOUNDARIES)}")
        for name in ("t_H", "U_H", "sim_time", "epsilon_t"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "sim_time", abs(float(self.sim_time)))
        object.__setattr__(self, "eta", int(self.eta))

    @property
    def tau(self) -> float:
        return hubbard_tau(self.sim_time, self.t_H, self.U_H)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HubbardParams":
        return cls(
            t_H=float(data["t_H"]),
            U_H=float(data["U_H"]),
            eta=int(data["eta"]),
            sim_time=float(data["sim_time"]),
            epsilon_t=float(data["epsilon_t"]),
            boundary=data.get("boundary", "periodic"),
        )


def hubbard_term_matrix(t_H: float, U_H: float) -> np.ndarray:
    """Bond term in the basis |↑,↓⟩, |↓,↑⟩, |↑↓,•⟩, |•,↑↓⟩."""
    t, u = float(t_H), float(U_H)
    return np.array(
        [
            [0, 0, -t, -t],
            [0, 0, t, t],
            [-t, t, u, 0],
            [-t, t, 0, u],
        ],
        dtype=np.complex128,
    )


def hubbard_tau(sim_time: float, t_H: float, U_H: float) -> float:
    """τ = |t|·√(8t_H² + 2U_H²)."""
    return abs(sim_time) * math.sqrt(8 * t_H**2 + 2 * U_H**2)


def _cost_exponent(tau: float, m: int, epsilon_t: float) -> float:
    """2√(ln 5 · ln(mτ/ε_t))."""
    ratio = m * tau / epsilon_t
    if not ratio > 1:
        raise ValueError(f"mτ/ε_t must exceed 1, got {ratio!r}")
    return 2 * math.sqrt(LN5 * math.log(ratio))


def hubbard_cost(eta: int, tau: float, m: int, epsilon_t: float) -> float:
    """Upper bound on the number of exponentials, 2η⁴τ·e^{2√(ln5·ln(mτ/ε_t))}."""
    exponent = _cost_exponent(tau, m, epsilon_t)
    log_cost = math.log(2) + 4 * math.log(eta) + math.log(tau) + exponent
    return math.exp(log_cost)


def hubbard_machine_epsilon(epsilon_t: float, eta: int, tau: float, m: int) -> float:
    """Machine epsilon that keeps the machine error of the Hubbard simulation below ε_t."""
    exponent = _cost_exponent(tau, m, epsilon_t)
    return epsilon_t * math.exp(-exponent) / (4 * eta**4 * tau * STABILITY_CONSTANT)


def enumerate_lattice_terms(eta: int, boundary: Boundary = "periodic") -> List[Tuple[int, int]]:
    """
    Nearest-neighbour bonds of an η × η lattice in row-major order.

    Sites are numbered r·η + c. Each site contributes its right then its down
    bond; with periodic wraparound on η = 2 the wrap bonds repeat existing
    pairs and are kept as separate bonds.
    """
    if int(eta) < 2:
        raise ValueError(f"eta must be at least 2, got {eta}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"Invalid boundary '{boundary}'. Must be one of: {', '.join(BOUNDARIES)}")
    periodic = boundary == "periodic"
    bonds = []
    for r in range(eta):
        for c in range(eta):
            site = r * eta + c
            if c + 1 < eta or periodic:
                bonds.append((site, r * eta + (c + 1) % eta))
            if r + 1 < eta or periodic:
                bonds.append((site, ((r + 1) % eta) * eta + c))
    return bonds


def hubbard_bond_generators(t_H: float, U_H: float, time_kind: TimeKind = "real") -> GeneratorSet:
    """
    Two-generator split of one bond term: hopping and on-site interaction.

    Real time gives skew-Hermitian generators −iH_k, imaginary time gives −H_k.
    Evolve with λ = |t|.
    """
    H = hubbard_term_matrix(t_H, U_H)
    interaction = np.diag(np.diag(H))
    hopping = H - interaction
    if time_kind == "real":
        return GeneratorSet((-1j * hopping, -1j * interaction), "skew_hermitian", label="hubbard-bond-real")
    if time_kind == "imaginary":
        return GeneratorSet((-hopping, -interaction), "hermitian", label="hubbard-bond-imaginary")
    raise ValueError(f"Invalid time kind '{time_kind}'. Must be 'real' or 'imaginary'")


# =============================================================================
# SYNTHETIC FAMILIES
# =============================================================================

def scalar_family(rate: float = 0.0) -> GeneratorSet:
    """One real 1×1 generator; its factors are the positive scalars e^{rate·λ_p}."""
    return GeneratorSet((np.array([[rate]], dtype=float),), "hermitian", label="scalar")


def pauli_pair(real_time: bool = True) -> GeneratorSet:
    """The non-commuting pair σ_x, σ_z as −iσ (real time) or σ (imaginary time)."""
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    if real_time:
        return GeneratorSet((-1j * sx, -1j * sz), "skew_hermitian", label="pauli-real")
    return GeneratorSet((sx, sz), "hermitian", label="pauli-imaginary")


def random_family(dim: int, m: int, cls: str, norm: float, seed: int) -> GeneratorSet:
    """m random generators of spectral norm `norm`, reproducible from seed."""
    return sample_generator_set(dim, m, cls, norm, RngStream(seed, (SAMPLING_STREAM,)))


def echo_family(dim: int, growth: float, seed: int = 0) -> GeneratorSet:
    """
    Real symmetric generator whose exponential has spectral norm `growth`.

    Half the eigenvalues are +ln(growth), half −ln(growth), in a random
    orthogonal basis, so e^{A} and e^{−A} stretch complementary subspaces.
    """
    if dim < 2 or growth <= 1:
        raise ValueError(f"echo family needs dim >= 2 and growth > 1, got {dim}, {growth}")
    rng = RngStream(seed, (SAMPLING_STREAM,)).generator()
    Q = scipy.stats.ortho_group.rvs(dim, random_state=rng)
    half = dim // 2
    eigenvalues = np.array([math.log(growth)] * (dim - half) + [-math.log(growth)] * half)
    A = (Q * eigenvalues) @ Q.T
    A = (A + A.T) / 2
    return GeneratorSet((A,), "hermitian", label="echo")


def echo_schedule(n_factors: int) -> Schedule:
    """
    N/2 forward unit steps followed by N/2 backward unit steps.

    The exact product is the identity while the partial products grow like
    growth^{N/2}, so element errors near the turning point are amplified.
    """
    if n_factors < 2 or n_factors % 2:
        raise ValueError(f"echo schedules need an even number of factors, got {n_factors}")
    half = n_factors // 2
    return custom_schedule(1, [(1, 1.0)] * half + [(1, -1.0)] * half, total_time=0.0)
