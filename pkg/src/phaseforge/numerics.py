"""Complex linear algebra kernels shared by the whole toolkit.

Vectors are 1-d complex128 ndarrays, dense matrices are 2-d complex128
ndarrays.  Larger structured maps go through :class:`LinearOperator`,
which only exposes forward and adjoint applications; nothing here ever
forms a matrix it was not given.  All functions are pure and safe to
call concurrently.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .randomness import TAG_POWER_START, TAG_PROBE, complex_gaussian, rng_from


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the last observed residual so callers can decide whether
    the result is still usable.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def _as_vector(z, name: str = "vector") -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    if z.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {z.shape}")
    return z


def _as_matrix(A, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {A.shape}")
    return A


def phase_scalar(z: complex) -> complex:
    """Unit-modulus direction of ``z``; equal to 1 when ``z`` is 0."""
    z = complex(z)
    if z == 0:
        return complex(1.0)
    return z / abs(z)


def phase_vec(z) -> np.ndarray:
    """Entrywise phase, with zero entries mapped to 1."""
    z = _as_vector(z)
    out = np.ones_like(z)
    np.divide(z, np.abs(z), out=out, where=(z != 0))
    return out


def modulus_vec(z) -> np.ndarray:
    """Entrywise modulus, as a real vector."""
    return np.abs(_as_vector(z))


def hadamard(a, b) -> np.ndarray:
    """Entrywise product of two vectors of equal length."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a * b


def dist_up_to_phase(x, z) -> float:
    """min over phi of ||exp(i phi) x - z||.

    The minimum equals sqrt(||x||^2 + ||z||^2 - 2 |<x, z>|) and is
    attained at the phase of <x, z>; it is evaluated as the residual at
    that phase, which stays accurate down to round-off where the
    textbook form loses half its digits to cancellation.
    """
    x = _as_vector(x, "x")
    z = _as_vector(z, "z")
    if x.shape != z.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {z.shape[0]}")
    c = np.vdot(x, z)
    if c == 0:
        return float(math.hypot(np.linalg.norm(x), np.linalg.norm(z)))
    return float(np.linalg.norm((c / abs(c)) * x - z))


class LinearOperator:
    """Matrix-free linear map with an explicit adjoint.

    Parameters
    ----------
    in_dim, out_dim:
        Input and output dimensions.
    apply_fn:
        Computes ``A @ v`` for a vector of length ``in_dim``.
    adjoint_fn:
        Computes ``A^H @ w`` for a vector of length ``out_dim``.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        apply_fn: Callable[[np.ndarray], np.ndarray],
        adjoint_fn: Callable[[np.ndarray], np.ndarray],
    ):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._apply = apply_fn
        self._adjoint = adjoint_fn

    def apply(self, v) -> np.ndarray:
        v = _as_vector(v, "v")
        if v.shape[0] != self.in_dim:
            raise ValueError(f"expected length {self.in_dim}, got {v.shape[0]}")
        return np.asarray(self._apply(v), dtype=np.complex128)

    def apply_adjoint(self, w) -> np.ndarray:
        w = _as_vector(w, "w")
        if w.shape[0] != self.out_dim:
            raise ValueError(f"expected length {self.out_dim}, got {w.shape[0]}")
        return np.asarray(self._adjoint(w), dtype=np.complex128)

    @classmethod
    def from_matrix(cls, M) -> "LinearOperator":
        M = _as_matrix(M)
        MH = M.conj().T
        return cls(M.shape[1], M.shape[0], lambda v: M @ v, lambda w: MH @ w)


def adjoint_defect(op: LinearOperator, seed: int = 0, probes: int = 8) -> float:
    """Worst normalized |<Au, w> - <u, A^H w>| over random probe pairs.

    A correctly paired adjoint keeps this at round-off level (<= 1e-10).
    """
    rng = rng_from(seed, TAG_PROBE)
    worst = 0.0
    for _ in range(probes):
        u = complex_gaussian(rng, op.in_dim)
        w = complex_gaussian(rng, op.out_dim)
        lhs = np.vdot(w, op.apply(u))
        rhs = np.vdot(op.apply_adjoint(w), u)
        scale = np.linalg.norm(u) * np.linalg.norm(w)
        if scale > 0:
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _normal_equations_cg(A, AH, rhs, tol, max_iter, x0):
    """CG on A^H A z = rhs; returns z with residual <= tol * ||rhs||."""
    n = A.shape[1]
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return np.zeros(n, dtype=np.complex128)
    target = tol * rhs_norm
    if x0 is None:
        z = np.zeros(n, dtype=np.complex128)
        r = rhs.copy()
    else:
        z = np.array(x0, dtype=np.complex128)
        r = rhs - AH @ (A @ z)
    p = r.copy()
    rs = np.vdot(r, r).real
    last = math.sqrt(rs)
    for _ in range(int(max_iter)):
        if math.sqrt(rs) <= target:
            # Recursive residual met the target; confirm with the true
            # residual, which can drift away from it in long runs.
            r = rhs - AH @ (A @ z)
            rs = np.vdot(r, r).real
            last = math.sqrt(rs)
            if last <= target:
                return z
            p = r.copy()
        q = AH @ (A @ p)
        pq = np.vdot(p, q).real
        if pq <= 0.0:
            raise ConvergenceError(
                "conjugate gradient broke down; the normal equations look "
                "rank-deficient or indefinite",
                residual=last,
            )
        alpha = rs / pq
        z += alpha * p
        r -= alpha * q
        rs_new = np.vdot(r, r).real
        p = r + (rs_new / rs) * p
        rs = rs_new
        last = math.sqrt(rs)
    if last <= target:
        r = rhs - AH @ (A @ z)
        if np.linalg.norm(r) <= target:
            return z
        last = float(np.linalg.norm(r))
    raise ConvergenceError(
        f"conjugate gradient did not reach tolerance within {max_iter} "
        f"iterations (residual {last:.3e}, target {target:.3e})",
        residual=last,
    )


def pinv_apply(A, y, tol: float = 1e-12, max_iter: int | None = None, x0=None) -> np.ndarray:
    """Least-squares solution of ``A z = y`` for a full-column-rank ``A``.

    Runs conjugate gradient on the normal equations ``A^H A z = A^H y``
    until their residual falls below ``tol * ||A^H y||``; raises
    :class:`ConvergenceError` if ``max_iter`` (default ``4 n``)
    iterations do not suffice.  ``x0`` warm-starts the iteration.
    """
    A = _as_matrix(A, "A")
    y = _as_vector(y, "y")
    m, n = A.shape
    if y.shape[0] != m:
        raise ValueError(f"y has length {y.shape[0]}, expected {m}")
    if max_iter is None:
        max_iter = 4 * n
    AH = A.conj().T
    return _normal_equations_cg(A, AH, AH @ y, tol, max_iter, x0)


def default_power_iters(n: int, eta: float = 1e-3) -> int:
    """Fixed power-iteration budget, ~10 (log n + log 1/eta)."""
    return max(1, math.ceil(10.0 * (math.log(max(n, 1)) + math.log(1.0 / eta))))


def power_iteration(
    op: LinearOperator,
    iters: int | None = None,
    seed: int = 0,
    return_trace: bool = False,
):
    """Approximate top eigenvector of a Hermitian PSD operator.

    Runs a fixed budget of iterations (no adaptive stopping, for
    determinism) from a seeded random start and returns the final
    unit-norm iterate.  With ``return_trace=True`` also returns the
    Rayleigh quotient after each application, which is non-decreasing
    for Hermitian PSD operators.
    """
    if op.in_dim != op.out_dim:
        raise ValueError("power iteration needs a square operator")
    n = op.in_dim
    if iters is None:
        iters = default_power_iters(n)
    rng = rng_from(seed, TAG_POWER_START)
    v = complex_gaussian(rng, n)
    nv = np.linalg.norm(v)
    while nv == 0.0:
        v = complex_gaussian(rng, n)
        nv = np.linalg.norm(v)
    v /= nv
    trace = []
    for _ in range(int(iters)):
        w = op.apply(v)
        trace.append(float(np.vdot(v, w).real))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # Start vector lay in the kernel; restart from fresh noise.
            v = complex_gaussian(rng, n)
            v /= np.linalg.norm(v)
            continue
        v = w / nw
    if return_trace:
        return v, np.asarray(trace)
    return v


def orthogonal_decompose(u, ref) -> tuple[complex, float, np.ndarray]:
    """Split ``u`` into a multiple of ``ref`` plus a unit orthogonal rest.

    Returns ``(lam, mu, v)`` with ``u = lam * ref + mu * v``,
    ``<v, ref> = 0`` and ``||v|| = 1`` whenever ``mu > 0``.  When the
    orthogonal part vanishes (relative to ``||u||``), ``mu`` is 0 and
    ``v`` is the zero vector, which callers must not use.
    """
    u = _as_vector(u, "u")
    ref = _as_vector(ref, "ref")
    if u.shape != ref.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {ref.shape[0]}")
    ref_sq = np.vdot(ref, ref).real
    if ref_sq == 0.0:
        raise ValueError("reference vector must be nonzero")
    lam = np.vdot(ref, u) / ref_sq
    rest = u - lam * ref
    mu = float(np.linalg.norm(rest))
    if mu <= 1e-14 * np.linalg.norm(u):
        return complex(lam), 0.0, np.zeros_like(u)
    return complex(lam), mu, rest / mu
