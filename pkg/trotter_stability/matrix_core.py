"""
Dense complex matrix core.

Spectral norms, matrix exponentials, relative distances and deterministic
sampling of generator sets. Every other module builds on these primitives.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Literal, Tuple, get_args

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

GeneratorClass = Literal["hermitian", "skew_hermitian", "general"]
GENERATOR_CLASSES = get_args(GeneratorClass)

MAT_EXP_GUARD = 700.0  # e^700 is close to the largest finite double
STRUCTURE_TOL = 1e-12  # entrywise tolerance for (skew-)Hermitian checks
SEED_LIMIT = 2**64


# =============================================================================
# VALIDATION HELPERS
# =============================================================================

def as_matrix(M: Any, name: str = "matrix") -> np.ndarray:
    """Return M as a square, finite complex128 array."""
    arr = np.asarray(M, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def is_hermitian(M: np.ndarray, tol: float = STRUCTURE_TOL) -> bool:
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


def is_skew_hermitian(M: np.ndarray, tol: float = STRUCTURE_TOL) -> bool:
    return bool(np.max(np.abs(M + M.conj().T), initial=0.0) <= tol)


def is_real(M: np.ndarray) -> bool:
    """True when every entry has an exactly zero imaginary part."""
    return not np.any(np.imag(M))


def is_unitary(M: np.ndarray, tol: float = 1e-10) -> bool:
    eye = np.eye(M.shape[-1])
    return bool(spectral_norm(M.conj().T @ M - eye) <= tol)


# =============================================================================
# NORMS AND EXPONENTIALS
# =============================================================================

def spectral_norm(M: Any) -> float:
    """Largest singular value of M."""
    arr = as_matrix(M)
    return float(scipy.linalg.svdvals(arr, check_finite=False)[0])


def spectral_norms(stack: np.ndarray) -> np.ndarray:
    """Spectral norms over the last two axes of a stack of matrices."""
    if stack.shape[-2:] == (1, 1):
        return np.abs(stack[..., 0, 0])
    return np.linalg.norm(stack, ord=2, axis=(-2, -1))


def mat_exp(M: Any) -> np.ndarray:
    """
    Matrix exponential e^M.

    Hermitian and complex skew-Hermitian inputs go through an eigendecomposition,
    which keeps e^M Hermitian or unitary to rounding; everything else uses
    scipy's scaling-and-squaring Padé approximant.

    Raises:
        ValueError: non-finite or non-square input
        OverflowError: ‖M‖ above MAT_EXP_GUARD
    """
    arr = as_matrix(M)
    norm = spectral_norm(arr)
    if norm > MAT_EXP_GUARD:
        raise OverflowError(f"‖M‖ = {norm!r} exceeds the exponential guard {MAT_EXP_GUARD}")

    if is_real(arr):
        # real inputs stay real so their exponentials carry exactly zero imaginary parts
        if is_hermitian(arr):
            w, V = scipy.linalg.eigh(arr.real)
            return ((V * np.exp(w)) @ V.T).astype(np.complex128)
        return scipy.linalg.expm(arr.real).astype(np.complex128)
    if is_hermitian(arr):
        w, V = scipy.linalg.eigh(arr)
        return (V * np.exp(w)) @ V.conj().T
    if is_skew_hermitian(arr):
        w, V = scipy.linalg.eigh(-1j * arr)
        return (V * np.exp(1j * w)) @ V.conj().T
    return scipy.linalg.expm(arr)


def relative_distance(U: Any, V: Any) -> float:
    """‖U − V‖ / ‖U‖."""
    U = as_matrix(U, "U")
    V = as_matrix(V, "V")
    if U.shape != V.shape:
        raise ValueError(f"Shape mismatch: {U.shape} vs {V.shape}")
    denom = spectral_norm(U)
    if denom == 0.0:
        raise ZeroDivisionError("relative distance to a zero matrix is undefined")
    return spectral_norm(U - V) / denom


# =============================================================================
# RANDOM STREAMS
# =============================================================================

@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream keyed by a master seed and a stream path.

    The same (master_seed, stream_path) always yields the same Philox
    sequence, independent of which thread asks for it or in what order.
    """

    master_seed: int
    stream_path: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < SEED_LIMIT:
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        path = tuple(int(i) for i in self.stream_path)
        if any(i < 0 for i in path):
            raise ValueError(f"stream_path entries must be nonnegative, got {self.stream_path}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_path", path)

    def child(self, *indices: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_path + tuple(indices))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_path)
        return np.random.Generator(np.random.Philox(seq))


# =============================================================================
# GENERATOR SETS
# =============================================================================

@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """The operators {A_j} on an ℓ-dimensional space whose sum generates the exact flow."""

    generators: Tuple[np.ndarray, ...]
    cls: GeneratorClass = "general"
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.cls not in GENERATOR_CLASSES:
            raise ValueError(f"Invalid class '{self.cls}'. Must be one of: {', '.join(GENERATOR_CLASSES)}")
        if len(self.generators) == 0:
            raise ValueError("A generator set needs at least one generator")

        mats = []
        for j, A in enumerate(self.generators, start=1):
            A = np.array(as_matrix(A, f"A_{j}"), copy=True)
            if mats and A.shape != mats[0].shape:
                raise ValueError(f"A_{j} has shape {A.shape}, expected {mats[0].shape}")
            if self.cls == "hermitian" and not is_hermitian(A):
                raise ValueError(f"A_{j} is not Hermitian to within {STRUCTURE_TOL}")
            if self.cls == "skew_hermitian" and not is_skew_hermitian(A):
                raise ValueError(f"A_{j} is not skew-Hermitian to within {STRUCTURE_TOL}")
            A.flags.writeable = False
            mats.append(A)
        object.__setattr__(self, "generators", tuple(mats))

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def total(self) -> np.ndarray:
        """A = Σ_j A_j."""
        return np.sum(self.generators, axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "class": self.cls,
            "label": self.label,
            "generators": [[[[float(z.real), float(z.imag)] for z in row] for row in A] for A in self.generators],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorSet":
        gens = []
        for A in data["generators"]:
            arr = np.asarray(A, dtype=float)
            gens.append(arr[..., 0] + 1j * arr[..., 1])
        return cls(tuple(gens), data.get("class", "general"), data.get("label", ""))


def sample_generator_set(
    dim: int,
    m: int,
    cls: GeneratorClass,
    norm_bound: float,
    rng: RngStream,
) -> GeneratorSet:
    """
    Draw m random generators of the given class, each rescaled to spectral norm norm_bound.

    Real and imaginary parts start as independent standard Gaussians and are
    symmetrized per class before rescaling.
    """
    if dim < 1 or m < 1:
        raise ValueError(f"dim and m must be positive, got dim={dim}, m={m}")
    if not (np.isfinite(norm_bound) and norm_bound > 0):
        raise ValueError(f"norm_bound must be positive and finite, got {norm_bound}")
    if cls not in GENERATOR_CLASSES:
        raise ValueError(f"Invalid class '{cls}'. Must be one of: {', '.join(GENERATOR_CLASSES)}")

    gen = rng.generator()
    mats = []
    for _ in range(m):
        G = gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))
        if cls == "hermitian":
            G = (G + G.conj().T) / 2
        elif cls == "skew_hermitian":
            G = (G - G.conj().T) / 2
        mats.append(G * (norm_bound / spectral_norm(G)))

    logger.debug("Sampled %d %s generators of dim %d (stream %s)", m, cls, dim, rng.stream_path)
    return GeneratorSet(tuple(mats), cls, label=f"random-{cls}")
