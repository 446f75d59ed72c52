"""Alternating projections in signal space, with stagnation diagnostics.

One step maps ``z`` to the least-squares solution of
``A z' = b * phase(A z)``: project the current measurement vector onto
the magnitude constraint set, then back onto the range of ``A``.  The
iteration can converge to the planted signal (up to a global phase) or
lock into a stagnation point; the residual
``||(A A^+)(b * phase(y)) - y|| / ||b||`` is zero exactly at the fixed
points of the measurement-space iteration and is used both as a
diagnostic and to stop runs that have stopped moving.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    _as_matrix,
    _as_vector,
    _normal_equations_cg,
    dist_up_to_phase,
    phase_vec,
    pinv_apply,
)

STAGNATION_WINDOW = 10


class SolverDivergenceError(RuntimeError):
    """Iterate norm blew past the divergence guard (numerical blow-up)."""


class StopReason(str, enum.Enum):
    SUCCESS = "success"
    MAX_ITERS = "max_iters"
    STAGNATED = "stagnated"


@dataclass(frozen=True)
class StoppingCriteria:
    """Termination policy for :func:`run`.

    ``success_tol`` is relative to the ground-truth norm and only
    applies when a ground truth is supplied.  ``stagnation_tol`` bounds
    the spread of the stagnation residual over the last
    ``STAGNATION_WINDOW`` iterations.  ``divergence_guard`` multiplies
    the norm of the least-squares solution of ``A z = b`` to form a
    hard cap on iterate norms; tripping it raises, since the iteration
    is provably bounded.
    """

    max_iters: int = 1000
    success_tol: float = 1e-7
    stagnation_tol: float = 1e-9
    divergence_guard: float = 1e3

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.success_tol <= 0:
            raise ValueError(f"success_tol must be positive, got {self.success_tol}")
        if self.stagnation_tol <= 0:
            raise ValueError(f"stagnation_tol must be positive, got {self.stagnation_tol}")
        if self.divergence_guard <= 0:
            raise ValueError(f"divergence_guard must be positive, got {self.divergence_guard}")


@dataclass(frozen=True)
class SolverRun:
    """Outcome of one alternating projections run.

    ``error_trace`` holds the per-iteration relative distance to the
    ground truth (None when no ground truth was supplied);
    ``stagnation_residual_trace`` holds one residual per iteration.
    """

    final_iterate: np.ndarray
    iterations_used: int
    stop_reason: StopReason
    stagnation_residual_trace: np.ndarray
    error_trace: np.ndarray | None = field(default=None)


def _check_problem(A, b):
    A = _as_matrix(A, "A")
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if np.any(b < 0):
        raise ValueError("b must be entrywise nonnegative")
    return A, b


def ap_step(A, b, z, tol: float = 1e-12, max_iter: int | None = None) -> np.ndarray:
    """One alternating projections step in signal space."""
    A, b = _check_problem(A, b)
    z = _as_vector(z, "z")
    if z.shape[0] != A.shape[1]:
        raise ValueError(f"z has length {z.shape[0]}, expected {A.shape[1]}")
    return pinv_apply(A, b * phase_vec(A @ z), tol=tol, max_iter=max_iter)


def stagnation_residual(A, b, y) -> float:
    """``||(A A^+)(b * phase(y)) - y|| / ||b||``.

    Vanishes exactly at fixed points of the measurement-space
    iteration, in particular at ``y = A x0``; generic vectors give a
    strictly positive residual.
    """
    A, b = _check_problem(A, b)
    y = _as_vector(y, "y")
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"y has length {y.shape[0]}, expected {A.shape[0]}")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        raise ValueError("b must be nonzero")
    z = pinv_apply(A, b * phase_vec(y))
    return float(np.linalg.norm(A @ z - y) / b_norm)


def run(A, b, z0, criteria: StoppingCriteria | None = None, ground_truth=None) -> SolverRun:
    """Iterate alternating projections until success, stagnation, or the cap.

    Success requires a ground truth: the run stops once the relative
    distance (up to a global phase) falls below ``success_tol``.
    Stagnation fires when the stagnation residual moves by less than
    ``stagnation_tol`` over the last ``STAGNATION_WINDOW`` iterations,
    which covers both convergence to a wrong fixed point and, when no
    ground truth is given, settling at the solution.
    """
    if criteria is None:
        criteria = StoppingCriteria()
    A, b = _check_problem(A, b)
    n = A.shape[1]
    z = _as_vector(z0, "z0").copy()
    if z.shape[0] != n:
        raise ValueError(f"z0 has length {z.shape[0]}, expected {n}")
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        raise ValueError("b must be nonzero")
    gt = None
    gt_norm = 0.0
    if ground_truth is not None:
        gt = _as_vector(ground_truth, "ground_truth")
        gt_norm = float(np.linalg.norm(gt))
        if gt_norm == 0.0:
            raise ValueError("ground truth must be nonzero")

    AH = A.conj().T
    cg_iters = 4 * n
    norm_cap = criteria.divergence_guard * np.linalg.norm(
        _normal_equations_cg(A, AH, AH @ b.astype(np.complex128), 1e-12, cg_iters, None)
    )

    residuals: list[float] = []
    errors: list[float] = []
    y = A @ z
    stop = StopReason.MAX_ITERS
    iterations = 0
    for k in range(1, criteria.max_iters + 1):
        w = b * phase_vec(y)
        z = _normal_equations_cg(A, AH, AH @ w, 1e-12, cg_iters, z)
        y_next = A @ z
        # ||y_next - y|| is exactly the stagnation residual of y.
        residuals.append(float(np.linalg.norm(y_next - y) / b_norm))
        y = y_next
        iterations = k
        if np.linalg.norm(z) > norm_cap:
            raise SolverDivergenceError(
                f"iterate norm exceeded {criteria.divergence_guard} times the "
                "least-squares baseline at iteration "
                f"{k}; this signals numerical blow-up"
            )
        if gt is not None:
            err = dist_up_to_phase(gt, z) / gt_norm
            errors.append(err)
            if err <= criteria.success_tol:
                stop = StopReason.SUCCESS
                break
        if k >= STAGNATION_WINDOW:
            window = residuals[-STAGNATION_WINDOW:]
            if max(window) - min(window) < criteria.stagnation_tol:
                stop = StopReason.STAGNATED
                break

    return SolverRun(
        final_iterate=z,
        iterations_used=iterations,
        stop_reason=stop,
        stagnation_residual_trace=np.asarray(residuals),
        error_trace=np.asarray(errors) if gt is not None else None,
    )
