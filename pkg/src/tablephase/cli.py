"""Command-line entry point: ``tablephase <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input, 3 not converged, 4 budget exceeded.
Whenever ``--out`` is given, a ``<out>.manifest.json`` file is written next
to it; ``tablephase replay <manifest>`` re-runs the recorded command.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import phase
from .errors import InvalidInput, TablePhaseError
from .fiber import DEFAULT_FIBER_BUDGET, Target, enumerate_fiber, fiber_weights
from .moves import (basic_moves_2way, count_applicable_at_corner, markov_basis_3way,
                    plane_moves_3way)
from .sampler import ChainConfig, run_chain, tv_distance
from .tables import MarginSpec, Table, northwest_corner
from .tilt import solve_mle

logger = logging.getLogger("tablephase")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_BUDGET = 0, 2, 3, 4


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_json(path: str | None):
    if path is None or path == "-":
        text = sys.stdin.read()
    else:
        text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"malformed JSON input: {exc}") from None


def _load_spec(args) -> MarginSpec:
    obj = _read_json(args.spec)
    if isinstance(obj, dict) and "axis_sums" not in obj and "data" in obj:
        return MarginSpec.of(Table.from_json(obj))  # a table stands in for its own margins
    return MarginSpec.from_json(obj)


def _emit(args, payload: str) -> None:
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# subcommands ---------------------------------------------------------------

def cmd_solve_mle(args) -> int:
    spec = _load_spec(args)
    report = solve_mle(spec, tol=args.tol, max_iter=args.max_iter, raise_on_failure=False)
    _emit(args, _dump(report.to_json()))
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_barvinok_scan(args) -> int:
    rows = phase.scan_3way(args.B, args.n, tol=args.tol, threads=args.threads)
    _emit(args, phase.rows_to_csv(rows) if args.format == "csv" else phase.rows_to_json(rows))
    failed = [r for r in rows if not r.converged]
    for r in failed:
        logger.warning("no convergence at n=%d, B=%g (residual %.3e)", r.n, r.B, r.residual)
    return EXIT_NOT_CONVERGED if failed else EXIT_OK


def cmd_scan_2way(args) -> int:
    rows = phase.scan_2way(args.C, args.B, args.n, args.delta, bezel_heavy=args.bezel_heavy,
                           tol=args.tol, threads=args.threads)
    _emit(args, phase.rows_to_csv(rows) if args.format == "csv" else phase.rows_to_json(rows))
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NOT_CONVERGED


def cmd_enumerate(args) -> int:
    spec = _load_spec(args)
    fiber = enumerate_fiber(spec, budget=args.budget)
    shown = fiber.array if args.limit is None else fiber.array[:args.limit]
    weights = fiber_weights(fiber, args.weights).weights if args.weights else None
    if args.format == "csv":
        header = [f"c{i}" for i in range(fiber.array.shape[1])] + (["weight"] if weights is not None else [])
        lines = [",".join(header)]
        for i, row in enumerate(shown):
            cells = [str(int(v)) for v in row]
            if weights is not None:
                cells.append(format(weights[i], ".17g"))
            lines.append(",".join(cells))
        _emit(args, "\n".join(lines) + "\n")
        return EXIT_OK
    out = {"count": len(fiber), "dims": list(spec.dims)}
    if not args.count_only:
        out["tables"] = [[int(v) for v in row] for row in shown]
        if weights is not None:
            out["weights"] = [float(w) for w in weights[:len(shown)]]
    _emit(args, _dump(out))
    return EXIT_OK


def _chain_config(args, spec: MarginSpec | None):
    if args.start == "auto":
        if spec is None:
            raise InvalidInput("--start auto needs --spec")
        start = northwest_corner(spec)
    else:
        start = Table.from_json(_read_json(args.start))
        if spec is not None and not spec.matches(start):
            raise InvalidInput("start table does not have the spec's margins")
    return ChainConfig(start, Target.parse(args.target), steps=args.steps, burn_in=args.burnin,
                       thin=args.thin, seed=args.seed, keep_samples=not args.summary)


def cmd_sample(args) -> int:
    spec = _load_spec(args) if args.spec is not None or args.start == "auto" else None
    stats = run_chain(_chain_config(args, spec))
    _emit(args, _dump(stats.to_json()))
    return EXIT_OK


def cmd_tv_check(args) -> int:
    spec = _load_spec(args)
    args.summary = False
    fiber = enumerate_fiber(spec, budget=args.budget)
    cfg = _chain_config(args, spec)
    stats = run_chain(cfg)
    exact = fiber_weights(fiber, cfg.target)
    tv = tv_distance(stats.frequencies(fiber), exact)
    _emit(args, _dump({"target": cfg.target.value, "fiber_size": len(fiber), "kept": cfg.n_kept,
                       "acceptance_rate": stats.acceptance_rate, "tv": tv}))
    return EXIT_OK


def cmd_moves(args) -> int:
    dims = tuple(args.dims)
    if len(dims) == 2:
        moves = basic_moves_2way(*dims)
    elif len(dims) == 3:
        moves = plane_moves_3way(*dims) if args.family == "plane" else markov_basis_3way(*dims)
    else:
        raise InvalidInput("--dims takes two or three sizes")
    if args.format == "json":
        out = {"dims": list(dims), "family": moves.family, "count": moves.size}
        if len(dims) == 3:
            out["corner_applicable"] = count_applicable_at_corner(*dims)
        if args.list:
            out["moves"] = [m.format() for m in moves]
        _emit(args, _dump(out))
        return EXIT_OK
    lines = [str(moves.size)]
    if args.list:
        lines.extend(m.format() for m in moves)
    _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_fiber_experiment(args) -> int:
    spec = _load_spec(args)
    report = phase.fiber_experiment(spec, targets=args.targets, steps=args.steps, seed=args.seed,
                                    burn_in=args.burnin, thin=args.thin, budget=args.budget)
    _emit(args, _dump(report))
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = phase.RunManifest.from_json(Path(args.manifest).read_text())
    argv = list(manifest.command)
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return main(argv, write_manifest=False)


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid scans")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (scans default to csv, everything else to json)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tablephase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def spec_arg(p):
        p.add_argument("--spec", "--input", dest="spec",
                       help="MarginSpec (or Table) JSON file; '-' or omitted reads stdin")

    def chain_args(p):
        p.add_argument("--start", default="auto", help="'auto' (northwest corner) or a Table JSON file")
        p.add_argument("--target", default="uniform", help="uniform | hypergeometric")
        p.add_argument("--steps", type=int, default=100_000)
        p.add_argument("--burnin", type=int, default=0)
        p.add_argument("--thin", type=int, default=1)

    p = sub.add_parser("solve-mle", parents=[common], help="geometric-tilting MLE for plane-sum margins")
    spec_arg(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=cmd_solve_mle)

    p = sub.add_parser("barvinok-scan", parents=[common], help="scan (n, B) for margins (Bn^2, n^2, ...)")
    p.add_argument("--B", type=_float_list, default=[1.0, 1.2, 2.5])
    p.add_argument("--n", type=_int_list, default=[50, 100, 200, 400, 800])
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_barvinok_scan, default_format="csv")

    p = sub.add_parser("scan-2way", parents=[common], help="2-way typical table for two-value bezel margins")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--B", type=_float_list, default=[1.2, 8.0])
    p.add_argument("--n", type=_int_list, default=[32, 64, 128])
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--bezel-heavy", dest="bezel_heavy", action=argparse.BooleanOptionalAction, default=True,
                   help="put floor(BCn) on the bezel lines (default) or on the bulk")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_scan_2way, default_format="csv")

    p = sub.add_parser("enumerate", parents=[common], help="list every table in a fiber")
    spec_arg(p)
    p.add_argument("--weights", choices=("uniform", "hypergeometric"))
    p.add_argument("--limit", type=int, help="list at most K tables")
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--budget", type=int, default=DEFAULT_FIBER_BUDGET)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("sample", parents=[common], help="Metropolis-Hastings walk on a fiber")
    spec_arg(p)
    chain_args(p)
    p.add_argument("--summary", action="store_true", help="omit samples, keep the corner trace")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("tv-check", parents=[common], help="sample, enumerate, report TV distance")
    spec_arg(p)
    chain_args(p)
    p.add_argument("--budget", type=int, default=DEFAULT_FIBER_BUDGET)
    p.set_defaults(func=cmd_tv_check)

    p = sub.add_parser("moves", parents=[common], help="count or list Markov moves")
    p.add_argument("--dims", type=_int_list, required=True, help="m,n or n1,n2,n3")
    p.add_argument("--list", action="store_true")
    p.add_argument("--family", choices=("plane", "basis"), default="plane",
                   help="3-way: the plane-exchange family, or that family plus in-slice minors")
    p.set_defaults(func=cmd_moves, default_format="text")

    p = sub.add_parser("fiber-experiment", parents=[common], help="both samplers vs the exact fiber")
    spec_arg(p)
    p.add_argument("--targets", type=lambda s: s.split(","), default=["uniform", "hypergeometric"])
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--budget", type=int, default=DEFAULT_FIBER_BUDGET)
    p.set_defaults(func=cmd_fiber_experiment)

    p = sub.add_parser("replay", parents=[common], help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def _config_of(args) -> dict:
    skip = {"func", "verbose", "default_format"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def main(argv=None, write_manifest: bool = True) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = getattr(args, "default_format", "json")
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        code = args.func(args)
    except TablePhaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, KeyError, TypeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if write_manifest and args.out and args.command != "replay":
        manifest = phase.RunManifest.create(argv, _config_of(args), seeds=[args.seed])
        Path(str(args.out) + ".manifest.json").write_text(manifest.to_json())
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
