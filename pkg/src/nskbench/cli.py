# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command line front end: simulate, classify, sweep and mms verbs.

Exit codes: 0 success, 1 no theorem case matched or a convergence study
missed its band, 2 invalid config or arguments, 3 positivity fault, 4 step
size underflow, 5 non-finite state (also a faulted convergence study).
"""

import argparse
import dataclasses
import functools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from nskbench import __version__
from nskbench.config import (
    OUTPUT_DIR_ENV,
    SweepConfig,
    WorkbenchConfig,
    build_initial_state,
    load_config,
)
from nskbench.diagnostics import TIMESERIES_COLUMNS, DiagnosticsRecorder
from nskbench.exceptions import (
    CONFIG_ERROR_EXIT,
    NO_MATCH_EXIT,
    ConfigError,
    DomainError,
    Termination,
)
from nskbench.geometry import to_eulerian
from nskbench.integrate import RunSummary, run
from nskbench.model import ModelKind, ModelParams, validate
from nskbench.output import (
    SnapshotWriter,
    raster_columns,
    write_csv,
    write_eulerian,
    write_json,
    write_raster,
    write_summary_text,
    write_timeseries,
)
from nskbench.regime import RegimeVerdict, Theorem, classify, sweep_regions
from nskbench.verify import (
    MMSReport,
    bump_case,
    default_ladder,
    equilibrium_case,
    mms_full_order,
    mms_spatial_order,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "nskbench-output"
DEFAULT_SPATIAL_LADDER = (33, 65, 129, 257)
DEFAULT_FULL_LADDER = (33, 65, 129)
MMS_X_MAX = 4.0
BATCH_SUMMARY_COLUMNS = (
    "member",
    "directory",
    "termination",
    "exit_code",
    "steps",
    "final_time",
    "v_min_global",
    "v_max_global",
    "max_abs_defect",
    "ledger_ok",
    "regime",
)


@dataclasses.dataclass(frozen=True)
class SimulationResult:
    """Everything a simulation produced, for reporting by the caller."""

    summary: RunSummary
    verdict: RegimeVerdict
    recorder: DiagnosticsRecorder
    directory: Path


def theorem_for(params: ModelParams) -> Theorem:
    """Case table that applies to a constitutive model."""
    if params.kind is ModelKind.KAZHIKHOV:
        return Theorem.T1_1
    return Theorem.T1_2


def _model_context(params: ModelParams) -> Dict[str, Any]:
    model = dataclasses.asdict(params)
    model["kind"] = params.kind.value
    return model


def simulate_config(config: WorkbenchConfig) -> SimulationResult:
    """Classify, build the initial state, run and write every artifact of one config.

    Raises:
        ConfigError: if the initial data cannot be built.
    """
    params, grid = config.params, config.grid
    verdict = classify(params.alpha, params.beta, params.gamma, theorem_for(params))
    if verdict.matched:
        logger.info(f"Parameters fall under {verdict.describe()}")
    else:
        logger.warning(
            f"no theorem case matched for alpha={params.alpha}, beta={params.beta}, "
            f"gamma={params.gamma} ({verdict.theorem.value}); running anyway"
        )

    initial = build_initial_state(config.initial, grid, params, config.base_dir)
    directory = config.output.directory
    directory.mkdir(parents=True, exist_ok=True)
    writer = SnapshotWriter(directory, grid) if config.output.snapshots else None
    recorder = DiagnosticsRecorder(grid, params, ledger_tol=config.ledger_tol, on_snapshot=writer)

    summary = run(initial, grid, params, config.run, sink=recorder)

    diagnostics = recorder.summary()
    write_timeseries(directory / "timeseries.csv", TIMESERIES_COLUMNS, recorder.rows)
    report = {
        "version": __version__,
        "run": summary.to_dict(),
        "model": _model_context(params),
        "grid": {"n": grid.n, "x_max": grid.x_max, "dx": grid.dx},
        "regime": verdict.describe(),
        "matched_cases": verdict.matched_cases,
        "diagnostics": diagnostics,
    }
    write_json(directory / "summary.json", report)
    write_summary_text(directory / "summary.txt", report)
    if config.output.eulerian and recorder.final_state is not None:
        table = to_eulerian(recorder.final_state, grid, params)
        write_eulerian(directory / "eulerian.csv", table)
    if not recorder.ledger_ok:
        logger.warning(
            f"Energy ledger exceeded tolerance {config.ledger_tol}: "
            f"max |defect| {recorder.max_abs_defect:.3e}"
        )
    logger.info(f"Wrote run artifacts to {directory}")
    return SimulationResult(
        summary=summary, verdict=verdict, recorder=recorder, directory=directory
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    """Run one simulation from a config file."""
    config = load_config(args.config)
    if args.output is not None:
        config = config.with_output(args.output)
    result = simulate_config(config)
    print(f"regime: {result.verdict.describe()}")
    print(f"termination: {result.summary.termination.value}")
    return result.summary.termination.exit_code


def _print_verdict(verdict: RegimeVerdict) -> None:
    print(f"regime: {verdict.describe()}")
    for label, slack in verdict.slacks.items():
        print(f"  {label:<60} slack {slack: .6g}")


def cmd_classify(args: argparse.Namespace) -> int:
    """Classify one parameter triple against one or more case tables."""
    theorems = args.theorem or [Theorem.T1_1.value, Theorem.T1_2.value]
    matched = False
    for theorem in theorems:
        verdict = classify(args.alpha, args.beta, args.gamma, theorem, eq_tol=args.eq_tol)
        _print_verdict(verdict)
        matched = matched or verdict.matched
    return 0 if matched else NO_MATCH_EXIT


def _run_member(
    config: WorkbenchConfig, index: int, overrides: Dict[str, Any]
) -> Dict[str, Any]:
    member = config.with_output(config.output.directory / "batch" / f"member_{index:03d}")
    member = member.with_model(**overrides)
    result = simulate_config(member)
    row = {
        "member": index,
        "directory": str(result.directory),
        "termination": result.summary.termination.value,
        "exit_code": result.summary.termination.exit_code,
        "steps": result.summary.steps,
        "final_time": result.summary.final_time,
        "v_min_global": result.summary.v_min_global,
        "v_max_global": result.summary.v_max_global,
        "max_abs_defect": result.recorder.max_abs_defect,
        "ledger_ok": result.recorder.ledger_ok,
        "regime": result.verdict.describe(),
    }
    row.update(overrides)
    return row


def run_batch(config: WorkbenchConfig) -> Tuple[List[Dict[str, Any]], Path]:
    """Run every batch member and write the batch summary.

    Members are validated before any of them runs. Rows keep member order even
    when members run in worker processes.

    Raises:
        ConfigError: if any member has inadmissible parameters.
    """
    members = config.batch.members()
    for overrides in members:
        config.with_model(**overrides)
    logger.info(f"Running batch of {len(members)} members with {config.batch.workers} worker(s)")

    member = functools.partial(_run_member, config)
    indices = range(len(members))
    if config.batch.workers > 1:
        with ProcessPoolExecutor(max_workers=config.batch.workers) as executor:
            rows = list(executor.map(member, indices, members))
    else:
        rows = list(map(member, indices, members))

    columns = list(BATCH_SUMMARY_COLUMNS) + list(config.batch.parameters)
    path = write_csv(config.output.directory / "batch_summary.csv", columns, rows)
    return rows, path


def _is_empty(sweep: SweepConfig) -> bool:
    counts = (sweep.resolution,) * 2 if isinstance(sweep.resolution, int) else sweep.resolution
    reversed_range = any(high < low for low, high in (sweep.alpha_range, sweep.beta_range))
    return 0 in counts or reversed_range


def run_sweep(config: WorkbenchConfig) -> List[Path]:
    """Write one regime raster per case table of the sweep section."""
    sweep = config.sweep
    paths = []
    for theorem in sweep.theorems:
        path = config.output.directory / f"regime_{theorem.value}.csv"
        if _is_empty(sweep):
            logger.info(f"Sweep over an empty raster; writing the {theorem.value} header only")
            paths.append(write_csv(path, raster_columns(theorem), []))
            continue
        try:
            verdicts = sweep_regions(
                sweep.alpha_range,
                sweep.beta_range,
                sweep.gamma,
                theorem,
                sweep.resolution,
                workers=sweep.workers,
            )
        except DomainError as error:
            raise ConfigError(f"Invalid sweep section: {error.msg}") from error
        paths.append(write_raster(path, theorem, verdicts))
        matched = sum(verdict.matched for line in verdicts for verdict in line)
        total = sum(len(line) for line in verdicts)
        logger.info(f"{theorem.value}: {matched} of {total} raster points matched, see {path}")
    return paths


def cmd_sweep(args: argparse.Namespace) -> int:
    """Regime rasters and batch simulations from a config with sweep and/or batch sections."""
    config = load_config(args.config)
    if args.output is not None:
        config = config.with_output(args.output)
    if config.sweep is None and config.batch is None:
        raise ConfigError(f"Config {args.config} has neither a sweep nor a batch section")
    config.output.directory.mkdir(parents=True, exist_ok=True)
    if config.sweep is not None:
        run_sweep(config)
    if config.batch is None:
        return 0
    rows, _ = run_batch(config)
    for row in rows:
        if row["exit_code"] != 0:
            return row["exit_code"]
    return 0


def _mms_params(kind: ModelKind, dim: int, args: argparse.Namespace) -> ModelParams:
    params = ModelParams(
        kind=kind,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        mu_tilde=args.mu_tilde,
        lambda_tilde=args.lambda_tilde,
        dim=dim,
        a=args.a,
    )
    violations = validate(params)
    if violations:
        raise ConfigError(f"Inadmissible model parameters: {', '.join(violations)}")
    return params


def run_mms(args: argparse.Namespace) -> List[MMSReport]:
    """Convergence studies for every requested model kind and dimension."""
    case = equilibrium_case() if args.equilibrium else bump_case()
    kinds = list(ModelKind) if args.kind == "all" else [ModelKind(args.kind)]
    reports = []
    for kind in kinds:
        for dim in args.dims:
            params = _mms_params(kind, dim, args)
            reports.append(mms_spatial_order(case, params, args.n, x_max=MMS_X_MAX))
            if args.skip_full:
                continue
            ladder = default_ladder(case, params, args.full_n, x_max=MMS_X_MAX)
            reports.append(mms_full_order(case, params, ladder, t_end=args.t_end, x_max=MMS_X_MAX))
    return reports


def cmd_mms(args: argparse.Namespace) -> int:
    """Run the manufactured-solution ladders and write mms_report.json."""
    directory = Path(args.output or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
    try:
        reports = run_mms(args)
    except DomainError as error:
        raise ConfigError(f"Invalid convergence study: {error.msg}") from error
    passed = all(report.passed for report in reports)
    write_json(
        directory / "mms_report.json",
        {"version": __version__, "passed": passed, "reports": [r.to_dict() for r in reports]},
    )
    for report in reports:
        order = "n/a" if report.order is None else f"{report.order:.3f}"
        print(
            f"{report.kind:<8} {report.model:<18} d={report.dim} order {order:<6} "
            f"{report.verdict.replace('-', ' ')}"
        )
    if any(report.verdict == "fault" for report in reports):
        return Termination.NON_FINITE.exit_code
    return 0 if passed else NO_MATCH_EXIT


def _node_counts(text: str) -> List[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the four verbs."""
    parser = argparse.ArgumentParser(
        prog="nskbench",
        description="Spherically symmetric Navier-Stokes-Korteweg numerical workbench.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging threshold (default INFO)",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    simulate = verbs.add_parser("simulate", help="Run one simulation from a YAML config")
    simulate.add_argument("config", type=Path)
    simulate.add_argument("--output", type=Path, help="Override the output directory")
    simulate.set_defaults(handler=cmd_simulate)

    classify_verb = verbs.add_parser("classify", help="Match a parameter triple against the cases")
    classify_verb.add_argument("alpha", type=float)
    classify_verb.add_argument("beta", type=float)
    classify_verb.add_argument("gamma", type=float)
    classify_verb.add_argument(
        "--theorem",
        action="append",
        choices=[theorem.value for theorem in Theorem],
        help="Case table, repeatable (default T1.1 and T1.2)",
    )
    classify_verb.add_argument("--eq-tol", type=float, default=1e-12, dest="eq_tol")
    classify_verb.set_defaults(handler=cmd_classify)

    sweep = verbs.add_parser("sweep", help="Regime rasters and batch runs from a YAML config")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--output", type=Path, help="Override the output directory")
    sweep.set_defaults(handler=cmd_sweep)

    mms = verbs.add_parser("mms", help="Manufactured-solution convergence studies")
    mms.add_argument(
        "--kind", default="all", choices=["all"] + [kind.value for kind in ModelKind]
    )
    mms.add_argument("--dims", type=_node_counts, default=[2, 3], help="Comma separated, e.g. 2,3")
    mms.add_argument(
        "--n",
        type=_node_counts,
        default=list(DEFAULT_SPATIAL_LADDER),
        help="Spatial ladder node counts, comma separated",
    )
    mms.add_argument(
        "--full-n",
        type=_node_counts,
        default=list(DEFAULT_FULL_LADDER),
        dest="full_n",
        help="Space-time ladder node counts, comma separated",
    )
    mms.add_argument("--t-end", type=float, default=2e-3, dest="t_end")
    mms.add_argument("--alpha", type=float, default=0.5)
    mms.add_argument("--beta", type=float, default=-2.5)
    mms.add_argument("--gamma", type=float, default=1.4)
    mms.add_argument("--mu-tilde", type=float, default=1.0, dest="mu_tilde")
    mms.add_argument("--lambda-tilde", type=float, default=0.0, dest="lambda_tilde")
    mms.add_argument("--a", type=float, default=2.0, help="Inner radius of the manufactured runs")
    mms.add_argument("--equilibrium", action="store_true", help="Use the constant state (1, 0)")
    mms.add_argument("--skip-full", action="store_true", dest="skip_full")
    mms.add_argument("--output", type=Path, help="Directory of mms_report.json")
    mms.set_defaults(handler=cmd_mms)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``nskbench`` console script; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return CONFIG_ERROR_EXIT if exit_.code else 0

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ConfigError, DomainError) as error:
        logger.error(error.msg)
        return error.exit_code
