"""Phase retrieval from Gaussian magnitude measurements.

Recover a complex signal, up to a global phase, from the entrywise
moduli of random linear measurements: alternating projections with a
truncated spectral (or random) starting point, a Monte Carlo harness
for success-probability phase diagrams, and an empirical verification
suite for the concentration and contraction inequalities the method
relies on.
"""

from .altproj import (
    SolverDivergenceError,
    SolverRun,
    StopReason,
    StoppingCriteria,
    ap_step,
    run,
    stagnation_residual,
)
from .experiments import (
    CellResult,
    GridConfig,
    GridResult,
    TrialRecord,
    export_grid,
    load_grid_json,
    run_grid,
    run_trial,
)
from .numerics import (
    ConvergenceError,
    LinearOperator,
    adjoint_defect,
    dist_up_to_phase,
    hadamard,
    modulus_vec,
    orthogonal_decompose,
    phase_scalar,
    phase_vec,
    pinv_apply,
    power_iteration,
)
from .problem import (
    InstanceFormatError,
    ProblemInstance,
    UnsupportedVersionError,
    derive_seed,
    load_instance,
    make_instance,
    sample_sensing_matrix,
    sample_signal,
    save_instance,
)
from .spectral_init import (
    InitKind,
    InitSpec,
    init_operator,
    make_initial,
    random_sphere_init,
    truncated_spectral_init,
    truncation_weights,
)
from .theory_checks import (
    LemmaReport,
    check_imaginary_part_lemma,
    check_phase_difference_lemma,
    check_projection_concentration,
    check_singular_value_bounds,
    check_small_modulus_lemma,
    measure_contraction_factor,
)

__version__ = "0.1.0"
