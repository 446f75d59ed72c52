"""Empirical verification of the finite-testable inequalities.

Each check draws seeded samples, evaluates one inequality with its
explicitly known constants, and returns a :class:`LemmaReport`.
Deterministic inequalities must hold on every sample; probabilistic
ones are allowed a violation frequency up to their stated probability
bound plus a small declared slack that absorbs finite-sample noise.
Constants the underlying statements leave unspecified are measured and
reported, never asserted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .altproj import ap_step
from .numerics import (
    LinearOperator,
    dist_up_to_phase,
    orthogonal_decompose,
    phase_vec,
    power_iteration,
)
from .problem import derive_seed, make_instance, sample_sensing_matrix
from .randomness import complex_gaussian, rng_from

__all__ = [
    "LemmaReport",
    "check_phase_difference_lemma",
    "check_singular_value_bounds",
    "check_small_modulus_lemma",
    "check_imaginary_part_lemma",
    "check_projection_concentration",
    "measure_contraction_factor",
    "format_report_table",
    "save_reports",
]

# Private derivation tags for the per-check random streams.
_TAG_RANGE_DRAWS = 0xC3
_TAG_DIRECTION = 0xC6

FREQUENCY_SLACK = {"default": 0.01, "imaginary_part": 0.02, "projection_concentration": 0.02}


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one empirical check.

    ``worst_ratio`` and ``bound`` live in the check's natural scale:
    for per-sample inequalities the ratio is left side over right side
    (violation above 1); for tail-probability checks they are the
    observed frequency and the allowed budget.  ``passed`` encodes the
    check's own acceptance rule, which for probabilistic checks is a
    violation frequency within the declared budget.
    """

    lemma_id: str
    samples: int
    worst_ratio: float
    bound: float
    violations: int
    passed: bool
    parameters: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lemma_id": self.lemma_id,
            "samples": self.samples,
            "worst_ratio": self.worst_ratio,
            "bound": self.bound,
            "violations": self.violations,
            "passed": self.passed,
            "parameters": dict(self.parameters),
            "details": dict(self.details),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LemmaReport":
        return cls(**data)


def check_phase_difference_lemma(samples: int = 1_000_000, seed: int = 0) -> LemmaReport:
    """|phase(z0+z) - phase(z0)| <= 2*[|z| >= |z0|/6] + (6/5)|Im(z/z0)|.

    Deterministic: holds for every complex pair, with the second term
    dropped when z0 = 0 (the left side is then at most 2).  Samples
    pairs across twelve decades of magnitude plus structured boundary
    slices (z0 = 0, z = 0, |z| at and just below |z0|/6); any violation
    fails the check.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = rng_from(seed, 0xC1)
    mag0 = 10.0 ** rng.uniform(-6.0, 6.0, samples)
    mag1 = 10.0 ** rng.uniform(-6.0, 6.0, samples)
    z0 = mag0 * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, samples))
    z = mag1 * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, samples))
    k = max(1, samples // 50)
    z0[:k] = 0.0
    z[k : 2 * k] = 0.0
    if samples >= 4 * k:
        bnd = np.abs(z0[2 * k : 3 * k]) / 6.0
        z[2 * k : 3 * k] = bnd * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, k))
        bnd = np.nextafter(np.abs(z0[3 * k : 4 * k]) / 6.0, 0.0)
        z[3 * k : 4 * k] = bnd * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, k))
    z0[0] = 0.0
    z[0] = 0.0

    lhs = np.abs(phase_vec(z0 + z) - phase_vec(z0))
    indicator = np.abs(z) >= np.abs(z0) / 6.0
    safe_z0 = np.where(z0 == 0, 1.0, z0)
    imag_term = np.where(z0 == 0, 0.0, np.abs(np.imag(z / safe_z0)))
    rhs = 2.0 * indicator + 1.2 * imag_term
    # The left side is a difference of unit-modulus floats, so its
    # evaluation carries a few ulps of absolute noise; when |z/z0| is
    # near machine epsilon the true margin drops below that noise and a
    # raw comparison rejects true instances.  A genuine failure of the
    # inequality (say a wrong constant) violates by margins many orders
    # of magnitude above this allowance.
    tolerance = 16.0 * np.finfo(np.float64).eps
    violations = int(np.count_nonzero(lhs > rhs + tolerance))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return LemmaReport(
        lemma_id="phase_difference",
        samples=samples,
        worst_ratio=float(ratios.max()),
        bound=1.0,
        violations=violations,
        passed=violations == 0,
        parameters={"seed": seed},
        details={
            "deterministic": True,
            "float_tolerance": tolerance,
            "max_excess": float(np.max(lhs - rhs)),
        },
    )


def check_singular_value_bounds(
    m: int = 200, n: int = 10, t: float = 0.3, trials: int = 200, seed: int = 0
) -> LemmaReport:
    """Extreme singular values of the sensing matrix stay in the band

    sqrt(m)(1 -+ sqrt(n/m) -+ t), each side failing with probability at
    most 2 exp(-m t^2).  The empirical violation frequency must stay
    below that bound plus 0.01 slack; with t = 0 the bound exceeds 1
    and the report is marked vacuous.
    """
    if m <= n:
        raise ValueError(f"need m > n, got m={m}, n={n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    root = math.sqrt(n / m)
    lo = math.sqrt(m) * (1.0 - root - t)
    hi = math.sqrt(m) * (1.0 + root + t)
    prob_bound = 2.0 * math.exp(-m * t * t)
    slack = FREQUENCY_SLACK["default"]
    budget = prob_bound + slack
    violations = 0
    worst = 0.0
    smin_sum = 0.0
    smax_sum = 0.0
    for i in range(trials):
        A = sample_sensing_matrix(m, n, derive_seed(seed, i))
        s = np.linalg.svd(A, compute_uv=False)
        smax, smin = float(s[0]), float(s[-1])
        smin_sum += smin
        smax_sum += smax
        if smin < lo or smax > hi:
            violations += 1
        worst = max(worst, smax / hi, (lo / smin) if lo > 0 and smin > 0 else 0.0)
    freq = violations / trials
    return LemmaReport(
        lemma_id="singular_value_bounds",
        samples=trials,
        worst_ratio=worst,
        bound=1.0,
        violations=violations,
        passed=freq <= budget,
        parameters={"m": m, "n": n, "t": t, "seed": seed},
        details={
            "probability_bound": prob_bound,
            "slack": slack,
            "budget": budget,
            "violation_frequency": freq,
            "vacuous": prob_bound >= 1.0,
            "mean_smin_over_sqrt_m": smin_sum / trials / math.sqrt(m),
            "mean_smax_over_sqrt_m": smax_sum / trials / math.sqrt(m),
        },
    )


def check_small_modulus_lemma(
    m: int = 400, n: int = 8, beta: float = 0.01, trials: int = 100, seed: int = 0
) -> LemmaReport:
    """Three coupled bounds on small-modulus coordinate subsets.

    Per trial, with S ranging over index sets of an m-row instance:

    * lower: the ceil(beta m) smallest entries of |A x0| (the worst set
      of that cardinality) keep norm >= beta^{3/2} e^{-1/2} ||A x0||,
      for beta < 1/2;
    * upper: for y in the range of A, the ceil(beta m) - 1 largest
      entries of |y| (again the worst set) have norm
      <= 10 sqrt(beta log(1/beta)) ||y||, for beta <= 1/100;
    * composite: for v in the range of A with
      ||v|| = gamma ||A x0|| / 2, gamma = beta^{3/2} e^{-1/2}, the
      entries of |A x0| where |v| >= |A x0| have norm <= eta ||v|| with
      eta = 10 sqrt(beta log(1/beta)).

    The subset constructions are exact worst cases for their
    cardinality (sorting argument), so sampling is only over the
    instance and the range vectors.
    """
    if not (0.0 < beta < 0.5):
        raise ValueError(f"beta must be in (0, 1/2), got {beta}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    run_upper = beta <= 0.01
    lower_bound_factor = beta**1.5 * math.exp(-0.5)
    eta = 10.0 * math.sqrt(beta * math.log(1.0 / beta))
    k_lower = math.ceil(beta * m)
    k_upper = max(0, math.ceil(beta * m) - 1)

    bad_trials = 0
    v5 = v6 = v3 = 0
    worst = 0.0
    for i in range(trials):
        inst = make_instance(n, m, derive_seed(seed, i))
        rng = rng_from(seed, _TAG_RANGE_DRAWS, i)
        ax0 = inst.A @ inst.x0
        moduli = np.abs(ax0)
        ax0_norm = float(np.linalg.norm(ax0))
        ordered = np.sort(moduli)
        lhs5 = float(np.linalg.norm(ordered[:k_lower]))
        bound5 = lower_bound_factor * ax0_norm
        ratio5 = bound5 / lhs5 if lhs5 > 0 else math.inf
        bad = lhs5 < bound5
        v5 += int(lhs5 < bound5)
        worst = max(worst, ratio5)
        if run_upper:
            y = inst.A @ complex_gaussian(rng, n)
            y_norm = float(np.linalg.norm(y))
            lhs6 = float(np.linalg.norm(np.sort(np.abs(y))[m - k_upper :])) if k_upper else 0.0
            bound6 = eta * y_norm
            v6 += int(lhs6 > bound6)
            bad = bad or lhs6 > bound6
            worst = max(worst, lhs6 / bound6 if bound6 > 0 else 0.0)

            v_dir = inst.A @ complex_gaussian(rng, n)
            v = v_dir * (0.5 * lower_bound_factor * ax0_norm / np.linalg.norm(v_dir))
            lhs3 = float(np.linalg.norm(moduli[np.abs(v) >= moduli]))
            bound3 = eta * float(np.linalg.norm(v))
            v3 += int(lhs3 > bound3)
            bad = bad or lhs3 > bound3
            worst = max(worst, lhs3 / bound3 if bound3 > 0 else 0.0)
        bad_trials += int(bad)
    slack = FREQUENCY_SLACK["default"]
    freq = bad_trials / trials
    return LemmaReport(
        lemma_id="small_modulus",
        samples=trials,
        worst_ratio=worst,
        bound=1.0,
        violations=bad_trials,
        passed=freq <= slack,
        parameters={"m": m, "n": n, "beta": beta, "seed": seed},
        details={
            "lower_violations": v5,
            "upper_violations": v6,
            "composite_violations": v3,
            "upper_and_composite_checked": run_upper,
            "subset_size_lower": k_lower,
            "subset_size_upper": k_upper,
            "slack": slack,
            "violation_frequency": freq,
        },
    )


def _range_orthocomplement_basis(A, ax0):
    """Orthonormal basis of Range(A) intersected with the complement of ax0."""
    n = A.shape[1]
    Q, _ = np.linalg.qr(A)
    q0 = ax0 / np.linalg.norm(ax0)
    P = Q - np.outer(q0, q0.conj() @ Q)
    U, _s, _ = np.linalg.svd(P, full_matrices=False)
    return U[:, : n - 1]


def check_imaginary_part_lemma(
    m: int = 800, n: int = 8, trials: int = 100, seed: int = 0
) -> LemmaReport:
    """||Im(v * conj(phase(A x0)))|| <= (4/5) ||v|| on the orthogonal slice.

    ``v`` ranges over the range of A orthogonal to A x0.  Random draws
    from that subspace must respect the bound up to a 0.02 violation
    budget; a per-instance maximizing search (power iteration on the
    induced real quadratic form) estimates the true worst case, which
    is reported but not asserted since the statement only guarantees it
    for sufficiently large oversampling.
    """
    if m < 50 * n:
        raise ValueError(f"need m >= 50 n as an oversampling proxy, got m={m}, n={n}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    slack = FREQUENCY_SLACK["imaginary_part"]
    if n == 1:
        return LemmaReport(
            lemma_id="imaginary_part",
            samples=0,
            worst_ratio=0.0,
            bound=0.8,
            violations=0,
            passed=True,
            parameters={"m": m, "n": n, "seed": seed},
            details={"vacuous": True, "reason": "the orthogonal slice of a 1-d range is {0}"},
        )
    violations = 0
    worst_draw = 0.0
    worst_search = 0.0
    ratios = []
    for i in range(trials):
        inst = make_instance(n, m, derive_seed(seed, i))
        rng = rng_from(seed, _TAG_RANGE_DRAWS, i)
        ax0 = inst.A @ inst.x0
        u_conj = np.conj(phase_vec(ax0))
        mu = 0.0
        while mu == 0.0:
            w = inst.A @ complex_gaussian(rng, n)
            _lam, mu, v = orthogonal_decompose(w, ax0)
        ratio = float(np.linalg.norm(np.imag(v * u_conj)))
        ratios.append(ratio)
        violations += ratio > 0.8
        worst_draw = max(worst_draw, ratio)

        B = _range_orthocomplement_basis(inst.A, ax0)
        G = np.hstack([(u_conj[:, None] * B).imag, (u_conj[:, None] * B).real])
        H = G.T @ G
        top = power_iteration(LinearOperator.from_matrix(H), seed=derive_seed(seed, i, 1))
        rq = float(np.vdot(top, H @ top).real)
        worst_search = max(worst_search, math.sqrt(max(0.0, rq)))
    freq = violations / trials
    return LemmaReport(
        lemma_id="imaginary_part",
        samples=trials,
        worst_ratio=worst_draw / 0.8,
        bound=1.0,
        violations=violations,
        passed=freq <= slack,
        parameters={"m": m, "n": n, "seed": seed},
        details={
            "bound_value": 0.8,
            "worst_draw_ratio": worst_draw,
            "worst_searched_ratio": worst_search,
            "mean_draw_ratio": float(np.mean(ratios)),
            "slack": slack,
            "violation_frequency": freq,
        },
    )


def check_projection_concentration(
    k1: int = 5, k2: int = 100, t: float = 0.1, trials: int = 10_000, seed: int = 0
) -> LemmaReport:
    """Tail bound for coordinate projections of a Gaussian vector.

    For X standard complex Gaussian in dimension k2 and Y its first k1
    coordinates, the event ||Y||/||X|| <= sqrt(t k1/k2) (for t < 1;
    the >= event for t > 1) has probability at most
    exp(k1 (1 - t + log t)).  The empirical frequency must stay within
    that bound plus 0.02 slack; t = 1 makes the bound vacuous and is
    rejected.
    """
    if not (1 <= k1 < k2):
        raise ValueError(f"need 1 <= k1 < k2, got k1={k1}, k2={k2}")
    if t <= 0 or t == 1:
        raise ValueError(f"t must be positive and different from 1, got {t}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = rng_from(seed, 0xC5)
    X = complex_gaussian(rng, (trials, k2))
    ratio = np.linalg.norm(X[:, :k1], axis=1) / np.linalg.norm(X, axis=1)
    threshold = math.sqrt(t * k1 / k2)
    if t < 1:
        hits = int(np.count_nonzero(ratio <= threshold))
    else:
        hits = int(np.count_nonzero(ratio >= threshold))
    prob_bound = math.exp(k1 * (1.0 - t + math.log(t)))
    slack = FREQUENCY_SLACK["projection_concentration"]
    freq = hits / trials
    return LemmaReport(
        lemma_id="projection_concentration",
        samples=trials,
        worst_ratio=freq,
        bound=prob_bound + slack,
        violations=hits,
        passed=freq <= prob_bound + slack,
        parameters={"k1": k1, "k2": k2, "t": t, "seed": seed},
        details={
            "threshold": threshold,
            "probability_bound": prob_bound,
            "slack": slack,
            "side": "lower_tail" if t < 1 else "upper_tail",
        },
    )


def measure_contraction_factor(
    m: int = 320, n: int = 16, epsilon_x: float = 0.05, trials: int = 500, seed: int = 0
) -> LemmaReport:
    """Per-step error ratio of the solver near the planted signal.

    Starts each trial at relative distance ``epsilon_x`` from the
    signal in a random direction and measures
    dist(x0, step(x)) / dist(x0, x), distances taken up to a global
    phase.  Passes when every sampled ratio is below 1; the mean ratio
    is the empirical contraction factor, reported because no explicit
    value is guaranteed.
    """
    if not (0.0 < epsilon_x <= 0.1):
        raise ValueError(f"epsilon_x must be in (0, 0.1], got {epsilon_x}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    ratios = []
    for i in range(trials):
        inst = make_instance(n, m, derive_seed(seed, i))
        rng = rng_from(seed, _TAG_DIRECTION, i)
        scale = epsilon_x * np.linalg.norm(inst.x0)
        denom = 0.0
        while denom == 0.0:
            d = complex_gaussian(rng, n)
            d /= np.linalg.norm(d)
            x = inst.x0 + scale * d
            denom = dist_up_to_phase(inst.x0, x)
        z1 = ap_step(inst.A, inst.b, x)
        ratios.append(dist_up_to_phase(inst.x0, z1) / denom)
    ratios = np.asarray(ratios)
    worst = float(ratios.max())
    violations = int(np.count_nonzero(ratios >= 1.0))
    return LemmaReport(
        lemma_id="contraction",
        samples=trials,
        worst_ratio=worst,
        bound=1.0,
        violations=violations,
        passed=worst < 1.0,
        parameters={"m": m, "n": n, "epsilon_x": epsilon_x, "seed": seed},
        details={
            "empirical_contraction_factor": float(ratios.mean()),
            "min_ratio": float(ratios.min()),
        },
    )


def format_report_table(reports) -> str:
    """Fixed-width summary table, one line per report."""
    header = f"{'check':<26}{'samples':>9}{'violations':>12}{'worst':>12}{'bound':>12}  result"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.lemma_id:<26}{r.samples:>9}{r.violations:>12}"
            f"{r.worst_ratio:>12.4g}{r.bound:>12.4g}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)


def save_reports(reports, path) -> None:
    payload = {"format": "phaseforge-reports", "version": 1, "reports": [r.to_dict() for r in reports]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
