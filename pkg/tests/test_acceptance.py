"""Acceptance suite: one test per release criterion.

Each test pins the criterion's dimensions, trial counts, tolerances,
and runtime budget, and prints a PASS line with the measured numbers
(visible with ``pytest -s``).  Monte Carlo criteria are fully seeded,
so reruns are bit-identical.
"""

import time

import numpy as np

from phaseforge.altproj import ap_step
from phaseforge.cli import main as cli_main
from phaseforge.experiments import GridConfig, run_grid
from phaseforge.numerics import dist_up_to_phase, pinv_apply
from phaseforge.problem import derive_seed, make_instance
from phaseforge.randomness import complex_gaussian, rng_from
from phaseforge.spectral_init import InitKind, init_operator, truncated_spectral_init
from phaseforge.theory_checks import (
    check_imaginary_part_lemma,
    check_phase_difference_lemma,
    check_projection_concentration,
    check_singular_value_bounds,
    check_small_modulus_lemma,
    measure_contraction_factor,
)

_GRIDS = {}


def spectral_grid():
    if "spectral" not in _GRIDS:
        config = GridConfig(
            n_values=(16,),
            m_over_n_values=(1.5, 2.0, 3.0, 4.0, 6.0, 8.0),
            trials_per_cell=200,
            init_kind=InitKind.TRUNCATED_SPECTRAL,
            base_seed=2024,
        )
        _GRIDS["spectral"] = run_grid(config)
    return _GRIDS["spectral"]


def random_grid():
    if "random" not in _GRIDS:
        config = GridConfig(
            n_values=(16,),
            m_over_n_values=(2.0, 8.0),
            trials_per_cell=200,
            init_kind=InitKind.RANDOM_SPHERE,
            base_seed=2025,
        )
        _GRIDS["random"] = run_grid(config)
    return _GRIDS["random"]


def probability(grid, ratio):
    (cell,) = [c for c in grid.cells if c.ratio == ratio]
    return cell.success_probability


def report(name, elapsed, detail):
    print(f"[acceptance] {name}: PASS in {elapsed:.1f}s ({detail})")


def test_c1_fixed_point_exactness():
    start = time.perf_counter()
    worst = 0.0
    for t in range(100):
        inst = make_instance(16, 128, derive_seed(9001, t))
        z = ap_step(inst.A, inst.b, inst.x0)
        worst = max(worst, dist_up_to_phase(inst.x0, z) / np.linalg.norm(inst.x0))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-10, f"worst fixed-point error {worst:.3e}"
    assert elapsed < 5.0
    report("criterion 1 (fixed-point exactness)", elapsed, f"worst rel error {worst:.2e}")


def test_c2_local_linear_convergence():
    start = time.perf_counter()
    rep = measure_contraction_factor(m=320, n=16, epsilon_x=0.05, trials=500, seed=9002)
    elapsed = time.perf_counter() - start
    assert rep.worst_ratio < 1.0, f"a trial failed to contract: {rep.worst_ratio}"
    assert rep.violations == 0
    mean_ratio = rep.details["empirical_contraction_factor"]
    assert mean_ratio <= 0.9, f"mean contraction {mean_ratio}"
    assert elapsed < 60.0
    report(
        "criterion 2 (local linear convergence)",
        elapsed,
        f"max ratio {rep.worst_ratio:.3f}, empirical contraction factor {mean_ratio:.3f}",
    )


def test_c3_global_convergence_with_spectral_init():
    start = time.perf_counter()
    rates = {}
    for n in (16, 32):
        config = GridConfig(
            n_values=(n,),
            m_over_n_values=(10.0,),
            trials_per_cell=200,
            init_kind=InitKind.TRUNCATED_SPECTRAL,
            base_seed=9003,
        )
        records = run_grid(config).cells[0].records
        rates[n] = np.mean([r.final_relative_error <= 1e-5 for r in records])
    elapsed = time.perf_counter() - start
    for n, rate in rates.items():
        assert rate >= 0.95, f"success rate {rate} at n={n}, m={10 * n}"
    assert elapsed < 120.0
    report(
        "criterion 3 (global convergence, m = 10n)",
        elapsed,
        f"success rates n=16: {rates[16]:.3f}, n=32: {rates[32]:.3f}",
    )


def test_c4_phase_diagram_shape():
    start = time.perf_counter()
    grid = spectral_grid()
    elapsed = time.perf_counter() - start
    ratios = [1.5, 2.0, 3.0, 4.0, 6.0, 8.0]
    probs = [probability(grid, r) for r in ratios]
    inversions = [max(0.0, probs[i] - probs[i + 1]) for i in range(len(probs) - 1)]
    big = [d for d in inversions if d > 0]
    assert len(big) <= 1, f"more than one inversion: {probs}"
    assert all(d <= 0.05 for d in inversions), f"inversion too large: {probs}"
    assert probs[0] <= 0.5, f"probability at ratio 1.5 is {probs[0]}"
    assert probs[-1] >= 0.9, f"probability at ratio 8 is {probs[-1]}"
    assert elapsed < 300.0
    detail = ", ".join(f"{r:g}:{p:.2f}" for r, p in zip(ratios, probs))
    report("criterion 4 (phase diagram shape)", elapsed, detail)


def test_c5_random_init_parity():
    start = time.perf_counter()
    rand = random_grid()
    spectral = spectral_grid()
    elapsed = time.perf_counter() - start
    p_rand_8 = probability(rand, 8.0)
    p_spectral_8 = probability(spectral, 8.0)
    assert p_rand_8 >= 0.9, f"random-init probability at ratio 8 is {p_rand_8}"
    assert abs(p_spectral_8 - p_rand_8) <= 0.1, f"gap {abs(p_spectral_8 - p_rand_8)}"
    # Parity also holds in the failing regime: both initializations are
    # (un)successful together at low oversampling.
    p_rand_2 = probability(rand, 2.0)
    p_spectral_2 = probability(spectral, 2.0)
    assert p_rand_2 <= 0.5 and p_spectral_2 <= 0.5
    assert elapsed < 300.0
    report(
        "criterion 5 (random init parity)",
        elapsed,
        f"ratio 8 random {p_rand_8:.2f} vs spectral {p_spectral_8:.2f}; "
        f"ratio 2 random {p_rand_2:.2f} vs spectral {p_spectral_2:.2f}",
    )


def test_c6_phase_difference_inequality():
    start = time.perf_counter()
    rep = check_phase_difference_lemma(samples=1_000_000, seed=9006)
    elapsed = time.perf_counter() - start
    assert rep.violations == 0
    assert rep.passed
    assert elapsed < 10.0
    report(
        "criterion 6 (phase difference inequality)",
        elapsed,
        f"10^6 samples, worst LHS/RHS {rep.worst_ratio:.6f}",
    )


def test_c7_probabilistic_inequalities():
    start = time.perf_counter()
    small = check_small_modulus_lemma(m=400, n=8, beta=0.01, trials=100, seed=9007)
    imag = check_imaginary_part_lemma(m=800, n=8, trials=100, seed=9008)
    sval = check_singular_value_bounds(m=200, n=10, t=0.3, trials=200, seed=9009)
    proj = check_projection_concentration(k1=5, k2=100, t=0.1, trials=10_000, seed=9010)
    elapsed = time.perf_counter() - start
    for rep in (small, imag, sval, proj):
        assert rep.passed, f"{rep.lemma_id} failed: {rep}"
    assert small.violations == 0 and imag.violations == 0 and sval.violations == 0
    assert proj.worst_ratio <= proj.bound
    assert elapsed < 120.0
    report(
        "criterion 7 (probabilistic inequalities)",
        elapsed,
        f"violations: small_modulus {small.violations}, imaginary_part {imag.violations}, "
        f"singular_values {sval.violations}; projection tail {proj.worst_ratio:.4f} "
        f"<= budget {proj.bound:.4f}",
    )


def test_c8_oracle_equivalences():
    start = time.perf_counter()
    # Least squares vs. explicit normal-equations solve.
    A = complex_gaussian(rng_from(9011), (6, 3))
    y = complex_gaussian(rng_from(9012), 6)
    oracle = np.linalg.solve(A.conj().T @ A, A.conj().T @ y)
    cg = pinv_apply(A, y)
    pinv_err = np.linalg.norm(cg - oracle) / np.linalg.norm(oracle)
    assert pinv_err <= 1e-8

    # Matrix-free weighted covariance vs. dense assembly.
    inst = make_instance(8, 64, 9013)
    sq = inst.b**2
    w = sq * (sq <= 9.0 * sq.mean())
    dense = (inst.A.conj().T * w) @ inst.A / inst.m
    op = init_operator(inst.A, inst.b)
    op_err = 0.0
    for t in range(5):
        v = complex_gaussian(rng_from(9014, t), 8)
        op_err = max(op_err, float(np.max(np.abs(op.apply(v) - dense @ v))))
    assert op_err <= 1e-10
    _vals, vecs = np.linalg.eigh(dense)
    z = truncated_spectral_init(inst.A, inst.b, power_iters=400, seed=9015)
    overlap = abs(np.vdot(z, vecs[:, -1]))
    assert overlap >= 1.0 - 1e-6

    # Phase-aligned distance vs. explicit phase-grid search.
    x = complex_gaussian(rng_from(9016), 8)
    zz = complex_gaussian(rng_from(9017), 8)
    phis = np.linspace(0.0, 2.0 * np.pi, 100_000, endpoint=False)
    grid_min = np.linalg.norm(np.exp(1j * phis)[:, None] * x[None, :] - zz[None, :], axis=1).min()
    dist_err = abs(dist_up_to_phase(x, zz) - grid_min)
    assert dist_err <= 1e-6

    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    report(
        "criterion 8 (oracle equivalences)",
        elapsed,
        f"pinv {pinv_err:.1e}, operator {op_err:.1e}, overlap 1-{1 - overlap:.1e}, "
        f"dist {dist_err:.1e}",
    )


def test_c9_grid_determinism_across_workers(tmp_path):
    start = time.perf_counter()
    blobs = []
    for jobs in (1, 8):
        for repeat in range(2):
            out = tmp_path / f"jobs{jobs}_run{repeat}"
            code = cli_main(
                [
                    "grid", "--n-list", "8", "--ratio-list", "2,4", "--trials", "6",
                    "--init", "random", "--seed", "9018", "--jobs", str(jobs),
                    "--out", str(out),
                ]
            )
            assert code == 0
            blobs.append((out / "grid_random_9018.csv").read_bytes())
    elapsed = time.perf_counter() - start
    assert all(blob == blobs[0] for blob in blobs), "grid CSV bytes differ across runs/workers"
    assert elapsed < 60.0
    report(
        "criterion 9 (grid determinism)",
        elapsed,
        f"4 runs, jobs in {{1, 8}}, {len(blobs[0])} identical bytes",
    )
