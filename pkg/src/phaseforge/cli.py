"""Command-line entry point.

Three subcommands: ``solve`` runs one reconstruction, ``grid`` sweeps a
success-probability grid and exports it, ``verify`` runs the empirical
inequality checks.  Exit codes are a stable scripting contract:
0 success, 1 usage or configuration error, 2 algorithmic failure
(non-convergence, or a failed verification).  All randomness flows
from ``--seed``; nothing reads the clock or the OS entropy pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .altproj import StopReason, StoppingCriteria, run
from .experiments import GridConfig, default_grid_filename, export_grid, run_grid
from .problem import InstanceFormatError, derive_seed, load_instance, make_instance
from .spectral_init import InitKind, InitSpec, make_initial
from . import theory_checks as tc

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2
ENV_OUT_DIR = "PHASEFORGE_OUT_DIR"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage problems; the scripting
    # contract reserves 2 for algorithmic failures, so remap to 1.
    def error(self, message):
        raise _UsageError(message)


# suite name -> (report id, callable, name of its sample-count kwarg, seed tag)
SUITE_CHECKS = {
    "lemma2": [("phase_difference", tc.check_phase_difference_lemma, "samples", 1)],
    "davidson": [("singular_value_bounds", tc.check_singular_value_bounds, "trials", 2)],
    "lemma3": [("small_modulus", tc.check_small_modulus_lemma, "trials", 3)],
    "lemma5": [("small_modulus", tc.check_small_modulus_lemma, "trials", 3)],
    "lemma6": [("small_modulus", tc.check_small_modulus_lemma, "trials", 3)],
    "lemma4": [("imaginary_part", tc.check_imaginary_part_lemma, "trials", 4)],
    "lemma7": [("projection_concentration", tc.check_projection_concentration, "trials", 5)],
    "contraction": [("contraction", tc.measure_contraction_factor, "trials", 6)],
}
SUITE_CHECKS["all"] = [
    SUITE_CHECKS["lemma2"][0],
    SUITE_CHECKS["davidson"][0],
    SUITE_CHECKS["lemma3"][0],
    SUITE_CHECKS["lemma4"][0],
    SUITE_CHECKS["lemma7"][0],
    SUITE_CHECKS["contraction"][0],
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phaseforge", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    solve = sub.add_parser("solve", help="run one reconstruction", parents=[], add_help=True)
    solve.add_argument("--n", type=int, default=None, help="signal dimension")
    solve.add_argument("--m", type=int, default=None, help="number of measurements")
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--init", choices=["spectral", "random"], default=None)
    solve.add_argument("--max-iters", type=int, default=None)
    solve.add_argument("--tol", type=float, default=None, help="relative success tolerance")
    solve.add_argument("--instance", default=None, help="load a .pri instance instead of sampling")
    solve.add_argument("--out", default=None, help="output directory")
    solve.add_argument("--config", default=None, help="JSON file mirroring the flags; flags win")

    grid = sub.add_parser("grid", help="sweep a success-probability grid")
    grid.add_argument("--n-list", default=None, help="comma-separated signal dimensions")
    grid.add_argument("--ratio-list", default=None, help="comma-separated m/n ratios")
    grid.add_argument("--trials", type=int, default=None)
    grid.add_argument("--init", choices=["spectral", "random"], default=None)
    grid.add_argument("--seed", type=int, default=None)
    grid.add_argument("--out", default=None, help="output directory or file path")
    grid.add_argument("--format", choices=["csv", "json"], default=None)
    grid.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    grid.add_argument("--config", default=None)

    verify = sub.add_parser("verify", help="run the empirical inequality checks")
    verify.add_argument("--suite", choices=sorted(SUITE_CHECKS), default=None)
    verify.add_argument("--seed", type=int, default=None)
    verify.add_argument("--samples", type=int, default=None, help="override per-check sample count")
    verify.add_argument("--jobs", type=int, default=None)
    verify.add_argument("--out", default=None)
    verify.add_argument("--config", default=None)

    return parser


_DEFAULTS = {
    "solve": {"seed": 0, "init": "spectral", "max_iters": 1000, "tol": 1e-7},
    "grid": {"trials": 100, "init": "spectral", "seed": 0, "format": "csv"},
    "verify": {"suite": "all", "seed": 0},
}

# Types the --config escape hatch must coerce to, mirroring the flags.
_CONFIG_TYPES = {
    "solve": {"n": int, "m": int, "seed": int, "max_iters": int, "tol": float,
              "init": str, "instance": str, "out": str},
    "grid": {"n_list": str, "ratio_list": str, "trials": int, "init": str,
             "seed": int, "out": str, "format": str, "jobs": int},
    "verify": {"suite": str, "seed": int, "samples": int, "jobs": int, "out": str},
}
_CONFIG_CHOICES = {"init": {"spectral", "random"}, "format": {"csv", "json"}}


def _coerce_config_value(key, value, target):
    if isinstance(value, (list, tuple)):
        # JSON lists are a natural spelling for --n-list / --ratio-list.
        return ",".join(str(v) for v in value)
    try:
        value = target(value)
    except (TypeError, ValueError):
        raise _UsageError(f"config key {key!r}: expected {target.__name__}, got {value!r}")
    choices = _CONFIG_CHOICES.get(key)
    if key == "suite":
        choices = set(SUITE_CHECKS)
    if choices is not None and value not in choices:
        raise _UsageError(f"config key {key!r}: {value!r} is not one of {sorted(choices)}")
    return value


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from --config, then from built-in defaults."""
    types = _CONFIG_TYPES[args.subcommand]
    config = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read config file: {exc}")
        if not isinstance(raw, dict):
            raise _UsageError("config file must hold a JSON object")
        for key, value in raw.items():
            norm = key.replace("-", "_").lstrip("_")
            if norm not in types:
                raise _UsageError(f"unknown config key {key!r}")
            config[norm] = _coerce_config_value(norm, value, types[norm])
    for key, value in config.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    for key, value in _DEFAULTS[args.subcommand].items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _out_dir(args) -> Path:
    out = getattr(args, "out", None)
    if out is None:
        out = os.environ.get(ENV_OUT_DIR, ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_int_list(text, flag) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated integers, got {text!r}")


def _parse_float_list(text, flag) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in str(text).split(","))
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated numbers, got {text!r}")


def cmd_solve(args) -> int:
    if args.instance is not None:
        if args.n is not None or args.m is not None:
            raise _UsageError("--instance conflicts with --n/--m")
        try:
            instance = load_instance(args.instance)
        except (OSError, InstanceFormatError) as exc:
            raise _UsageError(f"cannot load instance: {exc}")
    else:
        if args.n is None or args.m is None:
            raise _UsageError("either --instance or both --n and --m are required")
        if args.n < 1 or args.m < 1:
            raise _UsageError(f"dimensions must be positive, got n={args.n}, m={args.m}")
        instance = make_instance(args.n, args.m, derive_seed(args.seed, 0))
    try:
        criteria = StoppingCriteria(max_iters=args.max_iters, success_tol=args.tol)
    except ValueError as exc:
        raise _UsageError(str(exc))

    z0 = make_initial(
        InitSpec(kind=InitKind(args.init), seed=derive_seed(args.seed, 1)),
        instance.A,
        instance.b,
    )
    result = run(instance.A, instance.b, z0, criteria, ground_truth=instance.x0)
    for k in range(result.iterations_used):
        print(
            f"iter {k + 1:4d}  rel_error={result.error_trace[k]:.6e}  "
            f"stagnation_residual={result.stagnation_residual_trace[k]:.6e}"
        )
    final_error = float(result.error_trace[-1])
    print(
        f"stop: {result.stop_reason.value} after {result.iterations_used} iterations, "
        f"final rel_error={final_error:.6e}"
    )
    out_path = _out_dir(args) / f"solve_{args.seed}.json"
    payload = {
        "n": instance.n,
        "m": instance.m,
        "seed": args.seed,
        "init": args.init,
        "stop_reason": result.stop_reason.value,
        "iterations_used": result.iterations_used,
        "final_relative_error": final_error,
        "error_trace": [float(e) for e in result.error_trace],
        "stagnation_residual_trace": [float(r) for r in result.stagnation_residual_trace],
        "final_iterate": [[float(z.real), float(z.imag)] for z in result.final_iterate],
    }
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_path}")
    return EXIT_OK if result.stop_reason is StopReason.SUCCESS else EXIT_FAILURE


def _format_heat_summary(result) -> str:
    ratios = sorted({c.ratio for c in result.cells})
    by_key = {(c.n, c.ratio): c.success_probability for c in result.cells}
    width = 7
    lines = ["success probability (rows: n, columns: m/n)"]
    lines.append("n".ljust(6) + "".join(f"{r:>{width}g}" for r in ratios))
    for n in sorted({c.n for c in result.cells}):
        row = "".join(f"{by_key[(n, r)]:>{width}.2f}" for r in ratios)
        lines.append(f"{n:<6d}" + row)
    return "\n".join(lines)


def cmd_grid(args) -> int:
    n_values = _parse_int_list(args.n_list, "--n-list") if args.n_list is not None else ()
    ratios = _parse_float_list(args.ratio_list, "--ratio-list") if args.ratio_list is not None else ()
    try:
        config = GridConfig(
            n_values=n_values,
            m_over_n_values=ratios,
            trials_per_cell=args.trials,
            init_kind=InitKind(args.init),
            base_seed=args.seed,
        )
    except ValueError as exc:
        raise _UsageError(str(exc))
    if args.jobs is not None and args.jobs < 1:
        raise _UsageError(f"--jobs must be >= 1, got {args.jobs}")
    result = run_grid(config, jobs=args.jobs)

    out = getattr(args, "out", None)
    if out is not None and Path(out).suffix:
        out_path = Path(out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
    else:
        out_path = _out_dir(args) / default_grid_filename(config.init_kind, config.base_seed, args.format)
    export_grid(result, out_path, args.format)
    if result.cells:
        print(_format_heat_summary(result))
    print(f"wrote {out_path}")
    return EXIT_OK


def _run_check(task):
    fn, kwargs = task
    return fn(**kwargs)


def cmd_verify(args) -> int:
    checks = SUITE_CHECKS[args.suite]
    tasks = []
    for _report_id, fn, count_kw, tag in checks:
        kwargs = {"seed": derive_seed(args.seed, tag)}
        if args.samples is not None:
            if args.samples < 1:
                raise _UsageError(f"--samples must be >= 1, got {args.samples}")
            kwargs[count_kw] = args.samples
        tasks.append((fn, kwargs))
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise _UsageError(f"--jobs must be >= 1, got {jobs}")
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_check, tasks))
    else:
        reports = [_run_check(t) for t in tasks]
    print(tc.format_report_table(reports))
    out_path = _out_dir(args) / f"verify_{args.suite}_{args.seed}.json"
    tc.save_reports(reports, out_path)
    print(f"wrote {out_path}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILURE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args)
        if args.subcommand == "solve":
            return cmd_solve(args)
        if args.subcommand == "grid":
            return cmd_grid(args)
        return cmd_verify(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'phaseforge <subcommand> --help' for usage", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
