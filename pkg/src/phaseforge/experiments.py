"""Monte Carlo harness for success-probability phase diagrams.

A grid sweeps signal dimensions against oversampling ratios; every
cell runs independent seeded trials (sample an instance, initialize,
solve, record).  Per-trial seeds are derived from the base seed and
the cell coordinates, so results are identical whatever the worker
count or scheduling, and exports are byte-stable.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .altproj import SolverDivergenceError, StoppingCriteria, run, stagnation_residual
from .numerics import ConvergenceError
from .problem import derive_seed, make_instance
from .spectral_init import InitKind, InitSpec, make_initial

__all__ = [
    "GridConfig",
    "TrialRecord",
    "CellResult",
    "GridResult",
    "run_trial",
    "run_grid",
    "export_grid",
    "load_grid_json",
    "default_grid_filename",
]

# Grid runs stop at the solver's own tolerance; a trial counts as a
# success exactly when its final relative error is below it.
GRID_CRITERIA = StoppingCriteria()


def derived_m(n: int, ratio: float) -> int:
    return int(round(ratio * n))


@dataclass(frozen=True)
class GridConfig:
    """Definition of one (n, m/n) sweep."""

    n_values: tuple[int, ...]
    m_over_n_values: tuple[float, ...]
    trials_per_cell: int
    init_kind: InitKind
    criteria: StoppingCriteria = GRID_CRITERIA
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "m_over_n_values", tuple(float(r) for r in self.m_over_n_values))
        object.__setattr__(self, "init_kind", InitKind(self.init_kind))
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        for n in self.n_values:
            if n < 1:
                raise ValueError(f"signal dimensions must be positive, got {n}")
            for ratio in self.m_over_n_values:
                if ratio <= 0 or derived_m(n, ratio) < 1:
                    raise ValueError(f"ratio {ratio} gives m < 1 at n={n}")

    def cells(self) -> list[tuple[int, int, float]]:
        """Canonical cell list, sorted by (n, m, ratio)."""
        out = [(n, derived_m(n, r), r) for n in self.n_values for r in self.m_over_n_values]
        return sorted(out)


@dataclass(frozen=True)
class TrialRecord:
    """One solved instance.  ``wall_time`` is diagnostic only: it is

    excluded from equality and from serialization so that repeated runs
    compare and export identically.
    """

    n: int
    m: int
    trial_index: int
    init_kind: InitKind
    success: bool
    iterations_used: int
    final_relative_error: float
    final_stagnation_residual: float
    failure_reason: str | None = None
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class CellResult:
    n: int
    m: int
    ratio: float
    trials: int
    successes: int
    success_probability: float
    mean_iterations: float
    records: tuple[TrialRecord, ...]


@dataclass(frozen=True)
class GridResult:
    config: GridConfig
    cells: tuple[CellResult, ...]


def run_trial(
    n: int,
    m: int,
    init_kind: InitKind,
    criteria: StoppingCriteria,
    seed: int,
    trial_index: int = 0,
) -> TrialRecord:
    """Run one fully seeded trial; solver errors become failure records."""
    start = time.perf_counter()
    init_kind = InitKind(init_kind)
    try:
        instance = make_instance(n, m, derive_seed(seed, 0))
        z0 = make_initial(InitSpec(kind=init_kind, seed=derive_seed(seed, 1)), instance.A, instance.b)
        result = run(instance.A, instance.b, z0, criteria, ground_truth=instance.x0)
        error = float(result.error_trace[-1])
        residual = stagnation_residual(instance.A, instance.b, instance.A @ result.final_iterate)
        iterations = result.iterations_used
        reason = None
    except (ConvergenceError, SolverDivergenceError) as exc:
        error = math.inf
        residual = math.inf
        iterations = 0
        reason = f"{type(exc).__name__}: {exc}"
    return TrialRecord(
        n=n,
        m=m,
        trial_index=trial_index,
        init_kind=init_kind,
        success=error <= criteria.success_tol,
        iterations_used=iterations,
        final_relative_error=error,
        final_stagnation_residual=residual,
        failure_reason=reason,
        wall_time=time.perf_counter() - start,
    )


def _trial_task(args) -> TrialRecord:
    n, m, init_kind, criteria, seed, trial_index = args
    return run_trial(n, m, init_kind, criteria, seed, trial_index)


def run_grid(config: GridConfig, jobs: int | None = None) -> GridResult:
    """Run all cells of ``config``; trials may execute in parallel.

    The per-trial seed depends only on (base_seed, n, m, trial_index),
    and results are assembled in canonical cell order, so the outcome
    is independent of ``jobs``.
    """
    cells = config.cells()
    tasks = [
        (n, m, config.init_kind, config.criteria, derive_seed(config.base_seed, n, m, t), t)
        for (n, m, _ratio) in cells
        for t in range(config.trials_per_cell)
    ]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        records = [_trial_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (8 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_trial_task, tasks, chunksize=chunk))

    out = []
    k = config.trials_per_cell
    for i, (n, m, ratio) in enumerate(cells):
        cell_records = tuple(records[i * k : (i + 1) * k])
        successes = sum(r.success for r in cell_records)
        out.append(
            CellResult(
                n=n,
                m=m,
                ratio=ratio,
                trials=k,
                successes=successes,
                success_probability=successes / k,
                mean_iterations=float(np.mean([r.iterations_used for r in cell_records])),
                records=cell_records,
            )
        )
    return GridResult(config=config, cells=tuple(out))


def default_grid_filename(init_kind: InitKind, base_seed: int, fmt: str) -> str:
    return f"grid_{InitKind(init_kind).value}_{base_seed}.{fmt}"


def _criteria_dict(c: StoppingCriteria) -> dict:
    return {
        "max_iters": c.max_iters,
        "success_tol": c.success_tol,
        "stagnation_tol": c.stagnation_tol,
        "divergence_guard": c.divergence_guard,
    }


def grid_to_dict(result: GridResult) -> dict:
    cfg = result.config
    return {
        "format": "phaseforge-grid",
        "version": 1,
        "config": {
            "n_values": list(cfg.n_values),
            "m_over_n_values": list(cfg.m_over_n_values),
            "trials_per_cell": cfg.trials_per_cell,
            "init_kind": cfg.init_kind.value,
            "criteria": _criteria_dict(cfg.criteria),
            "base_seed": cfg.base_seed,
        },
        "cells": [
            {
                "n": c.n,
                "m": c.m,
                "ratio": c.ratio,
                "trials": c.trials,
                "successes": c.successes,
                "success_probability": c.success_probability,
                "mean_iterations": c.mean_iterations,
                "records": [
                    {
                        "trial_index": r.trial_index,
                        "success": r.success,
                        "iterations_used": r.iterations_used,
                        "final_relative_error": r.final_relative_error,
                        "final_stagnation_residual": r.final_stagnation_residual,
                        "failure_reason": r.failure_reason,
                    }
                    for r in c.records
                ],
            }
            for c in result.cells
        ],
    }


def grid_from_dict(data: dict) -> GridResult:
    if data.get("format") != "phaseforge-grid":
        raise ValueError("not a phaseforge grid export")
    if data.get("version") != 1:
        raise ValueError(f"unsupported grid export version {data.get('version')}")
    cfg_d = data["config"]
    config = GridConfig(
        n_values=tuple(cfg_d["n_values"]),
        m_over_n_values=tuple(cfg_d["m_over_n_values"]),
        trials_per_cell=cfg_d["trials_per_cell"],
        init_kind=InitKind(cfg_d["init_kind"]),
        criteria=StoppingCriteria(**cfg_d["criteria"]),
        base_seed=cfg_d["base_seed"],
    )
    cells = []
    for c in data["cells"]:
        records = tuple(
            TrialRecord(
                n=c["n"],
                m=c["m"],
                trial_index=r["trial_index"],
                init_kind=config.init_kind,
                success=r["success"],
                iterations_used=r["iterations_used"],
                final_relative_error=r["final_relative_error"],
                final_stagnation_residual=r["final_stagnation_residual"],
                failure_reason=r["failure_reason"],
            )
            for r in c["records"]
        )
        cells.append(
            CellResult(
                n=c["n"],
                m=c["m"],
                ratio=c["ratio"],
                trials=c["trials"],
                successes=c["successes"],
                success_probability=c["success_probability"],
                mean_iterations=c["mean_iterations"],
                records=records,
            )
        )
    return GridResult(config=config, cells=tuple(cells))


CSV_HEADER = "n,m,ratio,init_kind,trials,successes,success_probability,mean_iterations"


def export_grid(result: GridResult, path, fmt: str = "csv") -> None:
    """Write ``result`` to ``path`` as CSV (per-cell rows) or JSON.

    CSV starts with '#'-prefixed metadata lines recording the success
    and stopping choices, then the header row, then one row per cell.
    JSON keeps the full per-trial records and round-trips losslessly
    (wall-clock timings excluded).
    """
    fmt = str(fmt).lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r} (expected 'csv' or 'json')")
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(grid_to_dict(result), indent=2, sort_keys=True) + "\n")
        return
    cfg = result.config
    crit = cfg.criteria
    lines = [
        "# phaseforge grid export",
        f"# init_kind={cfg.init_kind.value} base_seed={cfg.base_seed} trials_per_cell={cfg.trials_per_cell}",
        f"# success: relative error <= {crit.success_tol!r} within {crit.max_iters} iterations",
        f"# stagnation_tol={crit.stagnation_tol!r} divergence_guard={crit.divergence_guard!r}",
        CSV_HEADER,
    ]
    for c in result.cells:
        lines.append(
            f"{c.n},{c.m},{c.ratio!r},{cfg.init_kind.value},{c.trials},"
            f"{c.successes},{c.success_probability!r},{c.mean_iterations!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def load_grid_json(path) -> GridResult:
    """Read back a JSON export of :func:`export_grid`."""
    with open(path) as fh:
        return grid_from_dict(json.load(fh))
