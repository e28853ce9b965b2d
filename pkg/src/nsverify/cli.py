"""Experiment runner: `nsverify run|verify|uniqueness|identities`.

Exit codes are a stable contract: 0 success (all applicable identities
hold), 1 usage or configuration problem, 2 solver abort, 3 identity
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
import time

import numpy as np

from . import __version__
from .claims import (
    check_compatibility,
    check_decay,
    check_energy_balance,
    check_eigenweighted_energy,
    check_tangential,
    check_theorem2_identities,
    run_uniqueness_experiment,
)
from .config import RunPlan, parse_config
from .errors import (
    BlowUpError,
    CFLError,
    ConfigError,
    ConstraintError,
    FormatError,
    NsverifyError,
    SolvabilityError,
)
from .fields import STAGGERED, VectorField, to_collocated
from .nsf1 import read_field
from .reporting import (
    RunManifest,
    write_identity_reports,
    write_manifest,
    write_trajectory,
    write_uniqueness_report,
)
from .solvers import run_nse, solve_reduced

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_IDENTITY = 3


def _initial_fields(plan: RunPlan):
    """(collocated v0, staggered v0 or None, boundary datum or None)."""
    scenario = plan.scenario
    v0 = scenario.initial_velocity()
    bc = scenario.boundary_datum()
    v0_mac = None
    if not scenario.grid.periodic_domain:
        v0_mac = scenario.initial_velocity(layout=STAGGERED)
    return v0, v0_mac, bc


def cmd_run(plan: RunPlan) -> int:
    started = time.monotonic()
    scenario = plan.scenario
    try:
        v0, v0_mac, bc = _initial_fields(plan)
        if plan.solver == "reduced":
            traj = solve_reduced(v0, scenario.forcing, bc, plan.solver_config, plan.sample_every)
        else:
            state0 = v0_mac if v0_mac is not None else v0
            traj = run_nse(state0, scenario.forcing, bc, plan.solver_config, plan.sample_every)
    except (BlowUpError, SolvabilityError) as err:
        extra = {"solver": plan.solver, "aborted": str(err)}
        if isinstance(err, BlowUpError):
            extra["abort_time"] = err.t
        write_manifest(
            plan.output.directory, plan.output.prefix,
            RunManifest("run", scenario.name, plan.raw, {},
                        time.monotonic() - started, extra=extra),
        )
        print(f"run aborted: {err}", file=sys.stderr)
        return EXIT_ABORT

    paths = write_trajectory(
        plan.output.directory, plan.output.prefix, traj, scenario.forcing, scenario.viscosity
    )
    write_manifest(
        plan.output.directory, plan.output.prefix,
        RunManifest("run", scenario.name, plan.raw, paths, time.monotonic() - started,
                    extra={"solver": plan.solver, "samples": len(traj.times)}),
    )
    return EXIT_OK


def _verify_one(plan: RunPlan) -> int:
    started = time.monotonic()
    scenario = plan.scenario
    grid = scenario.grid
    reports = []

    v0, v0_mac, bc = _initial_fields(plan)
    probe = v0_mac if v0_mac is not None else v0

    if bc is not None:
        datum_field = bc.evaluate(grid, 0.0, layout=STAGGERED)
        reports.append((0.0, check_compatibility(datum_field)))
    else:
        reports.append((0.0, check_compatibility(probe)))
    reports.append((0.0, check_tangential(probe)))
    reports.append((0.0, check_eigenweighted_energy(v0)))

    if not scenario.forcing.is_zero:
        ts = np.logspace(0.0, 2.0, 25)
        series = [(t, scenario.forcing.magnitude(grid, t)) for t in ts]
        reports.append((0.0, check_decay(series, scenario.forcing.decay_exponent)))

    compatible = all(
        r.verdict != "fails" for _, r in reports if r.identity_name == "boundary_compatibility"
    )
    aborted = None
    if compatible:
        try:
            traj = run_nse(probe, scenario.forcing, bc, plan.solver_config, plan.sample_every)
            if len(traj.times) >= 3:
                reports.append(
                    (traj.times[-1],
                     check_energy_balance(traj, scenario.forcing, scenario.viscosity))
                )
            if not grid.periodic_domain:
                for t, v in zip(traj.times, traj.velocities):
                    reports.append((t, check_compatibility(v)))
        except (BlowUpError, SolvabilityError) as err:
            aborted = str(err)

    paths = write_identity_reports(
        plan.output.directory, plan.output.prefix, reports, plan.raw
    )
    failed = [rep for _, rep in reports if rep.verdict == "fails"]
    write_manifest(
        plan.output.directory, plan.output.prefix,
        RunManifest("verify", scenario.name, plan.raw, paths, time.monotonic() - started,
                    extra={"identities_checked": len(reports),
                           "identities_failed": len(failed),
                           "aborted": aborted}),
    )
    if aborted is not None:
        print(f"verify run aborted: {aborted}", file=sys.stderr)
        return EXIT_ABORT
    if failed:
        for rep in failed:
            print(f"identity failed: {rep.identity_name} residual {rep.residual:.3e}",
                  file=sys.stderr)
        return EXIT_IDENTITY
    return EXIT_OK


def cmd_verify(plans: list[RunPlan], jobs: int) -> int:
    if len(plans) == 1 or jobs <= 1:
        codes = [_verify_one(plan) for plan in plans]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_verify_one, plans))
    return max(codes)


def cmd_uniqueness(plan: RunPlan) -> int:
    started = time.monotonic()
    scenario = plan.scenario
    v0, v0_mac, bc = _initial_fields(plan)
    report = run_uniqueness_experiment(
        v0,
        scenario.forcing,
        bc,
        plan.solver_config,
        plan.sample_every,
        scenario=scenario.name,
        v0_staggered=v0_mac,
        confirm_at_half_resolution=plan.confirm_uniqueness,
    )
    paths = write_uniqueness_report(
        plan.output.directory, plan.output.prefix, report, plan.raw
    )
    if report.nse_trajectory is not None:
        from .claims import difference_series
        from .nsf1 import write_field
        import os

        paths.update(
            write_trajectory(
                plan.output.directory, plan.output.prefix, report.nse_trajectory,
                scenario.forcing, scenario.viscosity, w_norms=report.w_norm,
            )
        )
        diffs = difference_series(report.reduced_trajectory, report.nse_trajectory)
        for k, (vr, w) in enumerate(zip(report.reduced_trajectory.velocities, diffs)):
            write_field(
                os.path.join(plan.output.directory, f"{plan.output.prefix}_red_vel_{k:06d}.nsf"),
                to_collocated(vr),
            )
            write_field(
                os.path.join(plan.output.directory, f"{plan.output.prefix}_w_{k:06d}.nsf"), w
            )
    write_manifest(
        plan.output.directory, plan.output.prefix,
        RunManifest("uniqueness", scenario.name, plan.raw, paths,
                    time.monotonic() - started,
                    extra={"verdict": report.verdict, "aborted": report.aborted}),
    )
    print(report.verdict)
    if report.aborted is not None:
        return EXIT_ABORT
    return EXIT_OK


def cmd_identities(field_path: str, second_path: str | None, out_dir: str | None) -> int:
    try:
        field = read_field(field_path)
    except FormatError as err:
        print(f"cannot read {field_path}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(field, VectorField):
        print(f"{field_path} holds a scalar; a velocity snapshot is needed", file=sys.stderr)
        return EXIT_CONFIG

    if second_path is None:
        reports = [
            check_compatibility(field),
            check_tangential(field),
            check_eigenweighted_energy(field),
        ]
    else:
        try:
            second = read_field(second_path)
        except FormatError as err:
            print(f"cannot read {second_path}: {err}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(second, VectorField):
            print(f"{second_path} holds a scalar; a velocity snapshot is needed",
                  file=sys.stderr)
            return EXIT_CONFIG
        reports = check_theorem2_identities(to_collocated(field), to_collocated(second))

    for rep in reports:
        print(
            f"{rep.identity_name}: lhs={rep.lhs:.6e} rhs={rep.rhs:.6e} "
            f"residual={rep.residual:.3e} [{rep.verdict}]"
        )
    if out_dir:
        write_identity_reports(out_dir, "identities", [(0.0, r) for r in reports],
                               {"field": field_path, "second": second_path})
    if any(r.verdict == "fails" for r in reports):
        return EXIT_IDENTITY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsverify",
        description="incompressible-flow solvers and identity verification harness",
    )
    parser.add_argument("--version", action="version", version=f"nsverify {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and export the trajectory")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (default: NSVERIFY_OUT)")

    p_verify = sub.add_parser("verify", help="evaluate every applicable identity")
    p_verify.add_argument("--config", required=True, action="append")
    p_verify.add_argument("--jobs", type=int, default=1)
    p_verify.add_argument("--out", default=None)

    p_uni = sub.add_parser("uniqueness", help="run both solvers and compare")
    p_uni.add_argument("--config", required=True)
    p_uni.add_argument("--out", default=None)

    p_id = sub.add_parser("identities", help="evaluate identities on stored snapshots")
    p_id.add_argument("field", help="NSF1 velocity snapshot")
    p_id.add_argument("second", nargs="?", default=None,
                      help="optional difference-field snapshot")
    p_id.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(parse_config(args.config, args.out))
        if args.command == "verify":
            plans = [parse_config(path, args.out) for path in args.config]
            return cmd_verify(plans, args.jobs)
        if args.command == "uniqueness":
            return cmd_uniqueness(parse_config(args.config, args.out))
        if args.command == "identities":
            return cmd_identities(args.field, args.second, args.out)
    except (ConfigError, CFLError, ConstraintError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NsverifyError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ABORT
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
