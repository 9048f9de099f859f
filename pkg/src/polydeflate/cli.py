"""Command line front end for the deflation solver.

Subcommands:

* ``solve``: run the refinement/deflation loop from a start point and
  write a JSON report.
* ``deflate``: apply one deflation stage at a point and write the
  expanded polynomial system.
* ``multiplicity``: print the dual-space multiplicity of a root.
* ``bench``: compare structured evaluation of a deflated system with
  evaluation of its expanded polynomials.

Exit codes: 0 on success, 1 for unusable input (bad flags, unreadable
files, parse errors), 2 when the computation did not reach its goal
(no convergence, deflation requested at a regular point, benchmark
mismatch), 3 when the multiplicity search did not stabilize.

Reports are written with a fixed key order and 17 significant digits,
so two runs with the same inputs and seed produce identical bytes
except for the wall-time field on the final line. Complex numbers
appear as two-element ``[re, im]`` arrays.
"""

import argparse
import json
import pathlib
import sys
import time

import numpy as np

from . import deflate, newton, oracle
from .polysys import ParseError, parse_system


class CliError(Exception):
    """Failure with a specific process exit code."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _UsageError(Exception):
    def __init__(self, parser, message):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


# ---------------------------------------------------------------------------
# deterministic JSON rendering
# ---------------------------------------------------------------------------

def _num(x) -> str:
    return "%.17g" % float(x)


def _string(s) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _pair(z) -> str:
    z = complex(z)
    return "[%s, %s]" % (_num(z.real), _num(z.imag))


def _emit(node, pad="") -> str:
    """Render a tree of dicts/lists whose leaves are pre-formatted strings."""
    inner = pad + "  "
    if isinstance(node, dict):
        if not node:
            return "{}"
        parts = [f"{inner}{_string(key)}: {_emit(value, inner)}"
                 for key, value in node.items()]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(node, list):
        if not node:
            return "[]"
        parts = [inner + _emit(value, inner) for value in node]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    return node


def _digits_or_null(value) -> str:
    return "null" if value is None else _num(value)


def report_tree(report: deflate.SolverReport) -> dict:
    """Fixed-order tree for one solver report; wall time stays last."""
    stages = []
    for stage in report.stages:
        stages.append({
            "corank_before": str(stage.corank_before),
            "corank_after": str(stage.corank_after),
            "inverse_condition_before": _num(stage.inverse_condition_before),
            "inverse_condition_after": _num(stage.inverse_condition_after),
            "multipliers": [_pair(z) for z in stage.multiplier_values],
        })
    return {
        "system": _string(report.system_name),
        "nvars": str(report.nvars),
        "neqs": str(report.neqs),
        "status": _string(report.status),
        "seed": str(report.seed),
        "deflations": str(report.deflations),
        "corank_sequence": [str(c) for c in report.corank_sequence],
        "corank_arrow": _string(report.corank_arrow),
        "residual_initial": _num(report.residual_initial),
        "residual_final": _num(report.residual_final),
        "inverse_condition_original": _num(report.inverse_condition_original),
        "inverse_condition_final": _num(report.inverse_condition_final),
        "correct_digits_initial": _digits_or_null(report.correct_digits_initial),
        "correct_digits_final": _digits_or_null(report.correct_digits_final),
        "solution": [_pair(z) for z in report.solution],
        "stages": stages,
        "wall_time_seconds": _num(report.wall_time_seconds),
    }


def render_report(report: deflate.SolverReport) -> str:
    return _emit(report_tree(report)) + "\n"


def render_reports(reports) -> str:
    return _emit([report_tree(r) for r in reports]) + "\n"


# ---------------------------------------------------------------------------
# input loading
# ---------------------------------------------------------------------------

def _read_text(path) -> str:
    try:
        return pathlib.Path(path).read_text()
    except OSError as err:
        raise CliError(1, f"cannot read {path}: {err.strerror or err}")


def _load_system(path):
    text = _read_text(path)
    try:
        return parse_system(text)
    except ParseError as err:
        raise CliError(1, f"{path}: {err}")


def _parse_pairs(data, origin):
    if not isinstance(data, list):
        raise CliError(1, f"{origin}: expected a JSON array of [re, im] pairs")
    values = []
    for entry in data:
        if (not isinstance(entry, list) or len(entry) != 2
                or not all(isinstance(v, (int, float)) for v in entry)):
            raise CliError(1, f"{origin}: expected a JSON array of [re, im] pairs")
        values.append(complex(entry[0], entry[1]))
    return np.asarray(values, dtype=complex)


def _load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as err:
        raise CliError(1, f"{path}: invalid JSON ({err.msg} at line {err.lineno})")


def _load_point(path, expected=None):
    point = _parse_pairs(_load_json(path), path)
    if expected is not None and point.shape != (expected,):
        raise CliError(1, f"{path}: point has {point.size} coordinates, "
                          f"expected {expected}")
    return point


def _load_point_list(path, expected):
    data = _load_json(path)
    if not isinstance(data, list) or not data:
        raise CliError(1, f"{path}: expected a non-empty JSON array of points")
    return [_parse_pairs(entry, f"{path}[{k}]")
            for k, entry in enumerate(data)]


def _write_text(path, text):
    try:
        pathlib.Path(path).write_text(text)
    except OSError as err:
        raise CliError(1, f"cannot write {path}: {err.strerror or err}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    system = _load_system(args.system)
    name = pathlib.Path(args.system).stem
    reference = None
    if args.reference is not None:
        reference = _load_point(args.reference, system.nvars)
    opts = newton.NewtonOptions(rank_tol=args.rank_tol,
                                residual_tol=args.residual_tol)

    if args.points is not None:
        if args.emit_deflated is not None:
            raise CliError(1, "--emit-deflated needs a single --point run")
        starts = _load_point_list(args.points, system.nvars)
        reports = []
        for index, start in enumerate(starts):
            if start.shape != (system.nvars,):
                raise CliError(1, f"{args.points}[{index}]: point has "
                                  f"{start.size} coordinates, expected {system.nvars}")
            reports.append(deflate.deflate_loop(
                system, start, opts, seed=args.seed + index,
                max_stages=args.max_deflations, reference=reference,
                system_name=name))
        _write_text(args.out, render_reports(reports))
        for report in reports:
            print(f"{name}: {report.status}, deflations {report.deflations}, "
                  f"corank {report.corank_arrow}")
        good = all(r.status == newton.CONVERGED_REGULAR for r in reports)
        return 0 if good else 2

    start = _load_point(args.point, system.nvars)
    report = deflate.deflate_loop(
        system, start, opts, seed=args.seed,
        max_stages=args.max_deflations, reference=reference, system_name=name)
    _write_text(args.out, render_report(report))
    if args.emit_deflated is not None:
        _write_text(args.emit_deflated, deflate.format_deflated(report.deflated))
    print(f"{name}: {report.status}, deflations {report.deflations}, "
          f"corank {report.corank_arrow}")
    return 0 if report.status == newton.CONVERGED_REGULAR else 2


def cmd_deflate(args) -> int:
    system = _load_system(args.system)
    point = _load_point(args.point, system.nvars)
    try:
        extended, _ = deflate.deflate_once(system, point, args.rank_tol, args.seed)
    except deflate.RegularPointError as err:
        raise CliError(2, str(err))
    _write_text(args.out, deflate.format_deflated(extended))
    print(f"wrote {args.out}: {extended.neqs} equations, "
          f"{extended.nvars} variables (stage rank {extended.stages[-1].rank})")
    return 0


def cmd_multiplicity(args) -> int:
    system = _load_system(args.system)
    point = _load_point(args.point, system.nvars)
    try:
        result = oracle.multiplicity(system, point, max_order=args.max_order)
    except ValueError as err:
        raise CliError(1, str(err))
    if result is None:
        raise CliError(3, f"multiplicity did not stabilize up to order {args.max_order}")
    print(result)
    return 0


def cmd_bench(args) -> int:
    system = _load_system(args.system)
    name = pathlib.Path(args.system).stem
    if args.point is not None:
        point = _load_point(args.point, system.nvars)
    else:
        point = np.zeros(system.nvars, dtype=complex)
    print(f"system: {name} ({system.neqs} equations, {system.nvars} variables)")
    if system.nvars < 8:
        print("note: below benchmark size (fewer than 8 variables)")

    rng = np.random.Generator(np.random.PCG64(args.seed))
    current = deflate.DeflatedSystem(system)
    z = point
    for stage in range(args.stages):
        try:
            current, multipliers = deflate.deflate_once(current, z, 1e-8, rng)
        except deflate.RegularPointError:
            raise CliError(2, f"system is regular after {stage} stage(s); "
                              f"cannot apply {args.stages}")
        z = np.concatenate([z, multipliers])
    expanded = current.expand()
    print(f"deflated: {args.stages} stage(s), {current.neqs} equations, "
          f"{current.nvars} variables")

    samples = [rng.normal(size=current.nvars) + 1j * rng.normal(size=current.nvars)
               for _ in range(max(args.trials, 20))]
    worst = 0.0
    for sample in samples[:20]:
        slow_value = expanded.value_at(sample)
        fast_value = current.value_at(sample)
        scale = 1.0 + np.linalg.norm(slow_value)
        worst = max(worst, np.linalg.norm(fast_value - slow_value) / scale)
        slow_jac = expanded.jacobian_at(sample)
        fast_jac = current.jacobian_at(sample)
        jscale = 1.0 + np.linalg.norm(slow_jac)
        worst = max(worst, np.linalg.norm(fast_jac - slow_jac) / jscale)
    print(f"equivalence over 20 points: max relative difference {_num(worst)}")
    if worst > 1e-10:
        raise CliError(2, "structured and expanded evaluation disagree")

    def clock(value_at, jacobian_at) -> float:
        begin = time.perf_counter()
        for sample in samples[:args.trials]:
            value_at(sample)
            jacobian_at(sample)
        return time.perf_counter() - begin

    structured = clock(current.value_at, current.jacobian_at)
    naive = clock(expanded.value_at, expanded.jacobian_at)
    print(f"structured: {_num(structured)} s for {args.trials} evaluations")
    print(f"expanded: {_num(naive)} s for {args.trials} evaluations")
    print(f"ratio: {_num(structured / naive)}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="polydeflate",
                     description="Newton solver with randomized deflation "
                                 "for singular roots of polynomial systems")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="run the deflation loop")
    solve.add_argument("--system", required=True, help="polynomial system file")
    group = solve.add_mutually_exclusive_group(required=True)
    group.add_argument("--point", help="JSON start point ([re, im] pairs)")
    group.add_argument("--points", help="JSON array of start points")
    solve.add_argument("--seed", type=int, default=deflate.DEFAULT_SEED,
                       help="random seed (with --points, point k uses seed+k)")
    solve.add_argument("--rank-tol", type=float, default=1e-8)
    solve.add_argument("--residual-tol", type=float, default=1e-12)
    solve.add_argument("--max-deflations", type=int, default=deflate.STAGE_CAP)
    solve.add_argument("--reference", help="known root for digit counting")
    solve.add_argument("--out", required=True, help="JSON report destination")
    solve.add_argument("--emit-deflated",
                       help="also write the final deflated system")
    solve.set_defaults(func=cmd_solve)

    deflate_cmd = commands.add_parser("deflate", help="apply one deflation stage")
    deflate_cmd.add_argument("--system", required=True)
    deflate_cmd.add_argument("--point", required=True)
    deflate_cmd.add_argument("--seed", type=int, default=deflate.DEFAULT_SEED)
    deflate_cmd.add_argument("--rank-tol", type=float, default=1e-8)
    deflate_cmd.add_argument("--out", required=True)
    deflate_cmd.set_defaults(func=cmd_deflate)

    mult = commands.add_parser("multiplicity",
                               help="dual-space multiplicity at a root")
    mult.add_argument("--system", required=True)
    mult.add_argument("--point", required=True)
    mult.add_argument("--max-order", type=int, default=12)
    mult.set_defaults(func=cmd_multiplicity)

    bench = commands.add_parser("bench",
                                help="time structured vs expanded evaluation")
    bench.add_argument("--system", required=True)
    bench.add_argument("--stages", type=int, default=1)
    bench.add_argument("--trials", type=int, default=1000)
    bench.add_argument("--point", help="deflation point (default: origin)")
    bench.add_argument("--seed", type=int, default=deflate.DEFAULT_SEED)
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(err.parser.format_usage(), end="", file=sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
