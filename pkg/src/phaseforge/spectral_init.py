"""Starting points for the alternating projections solver.

The careful initializer is the top eigenvector of a weighted sensing
covariance: rows are weighted by their squared magnitude data, with
rows whose squared magnitude exceeds a fixed multiple (9 by default) of
the mean dropped so that heavy-tailed rows cannot dominate.  The
eigenvector is computed matrix-free, each operator application being
``v -> A^H (w * (A v)) / m``, so the n x n matrix is never formed.
The cheap alternative draws a uniformly random point on the unit
sphere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import LinearOperator, power_iteration
from .randomness import TAG_SPHERE, complex_gaussian, rng_from

TRUNCATION_FACTOR = 9.0
DEFAULT_POWER_ITERS = 200


class InitKind(str, enum.Enum):
    TRUNCATED_SPECTRAL = "spectral"
    RANDOM_SPHERE = "random"
    SUPPLIED = "supplied"


@dataclass(frozen=True)
class InitSpec:
    """Which initializer to use, and its parameters."""

    kind: InitKind
    power_iters: int = DEFAULT_POWER_ITERS
    seed: int = 0
    supplied_vector: np.ndarray | None = None

    def __post_init__(self):
        if self.power_iters < 1:
            raise ValueError(f"power_iters must be >= 1, got {self.power_iters}")
        if self.kind is InitKind.SUPPLIED:
            if self.supplied_vector is None:
                raise ValueError("supplied initialization needs supplied_vector")
        elif self.supplied_vector is not None:
            raise ValueError(f"supplied_vector is only valid with kind=supplied, not {self.kind.value}")


def truncation_weights(b, factor: float = TRUNCATION_FACTOR) -> np.ndarray:
    """Row weights ``b_i^2 * [b_i^2 <= factor * mean(b^2)]``."""
    b = np.asarray(b, dtype=np.float64)
    sq = b * b
    return sq * (sq <= factor * sq.mean())


def init_operator(A, b, factor: float = TRUNCATION_FACTOR) -> LinearOperator:
    """Matrix-free weighted covariance ``v -> A^H (w * (A v)) / m``.

    Hermitian positive semidefinite by construction; equals the dense
    matrix ``A^H diag(w) A / m`` without ever forming it.
    """
    A = np.asarray(A, dtype=np.complex128)
    m, n = A.shape
    w = truncation_weights(b, factor)
    if w.shape != (m,):
        raise ValueError(f"b has shape {np.shape(b)}, expected ({m},)")
    AH = A.conj().T

    def apply(v):
        return AH @ (w * (A @ v)) / m

    return LinearOperator(n, n, apply, apply)


def truncated_spectral_init(
    A,
    b,
    power_iters: int = DEFAULT_POWER_ITERS,
    seed: int = 0,
    truncation_factor: float = TRUNCATION_FACTOR,
) -> np.ndarray:
    """Unit-norm top eigenvector of the truncated weighted covariance.

    Only ``b`` is consulted (the truncation indicator is a function of
    ``b`` alone).  The overall scale of the starting point is
    immaterial to the solver, which is invariant under positive
    rescaling, so no scale estimation is attempted.
    """
    w = truncation_weights(b, truncation_factor)
    if not np.any(w > 0):
        raise ValueError("degenerate magnitude data: every row was truncated away")
    return power_iteration(init_operator(A, b, truncation_factor), iters=power_iters, seed=seed)


def random_sphere_init(n: int, seed: int) -> np.ndarray:
    """Uniform draw from the unit sphere (normalized complex Gaussian)."""
    if n < 1:
        raise ValueError(f"dimension must be positive, got n={n}")
    rng = rng_from(seed, TAG_SPHERE)
    v = complex_gaussian(rng, n)
    nv = np.linalg.norm(v)
    while nv == 0.0:
        v = complex_gaussian(rng, n)
        nv = np.linalg.norm(v)
    return v / nv


def make_initial(spec: InitSpec, A, b) -> np.ndarray:
    """Dispatch to the initializer selected by ``spec``."""
    n = np.asarray(A).shape[1]
    if spec.kind is InitKind.TRUNCATED_SPECTRAL:
        return truncated_spectral_init(A, b, power_iters=spec.power_iters, seed=spec.seed)
    if spec.kind is InitKind.RANDOM_SPHERE:
        return random_sphere_init(n, spec.seed)
    v = np.asarray(spec.supplied_vector, dtype=np.complex128)
    if v.shape != (n,):
        raise ValueError(f"supplied vector has shape {v.shape}, expected ({n},)")
    return v
