"""Command-line interface: ``mbdp {gen,solve,bench,validate}``.

Exit codes: 0 success / converged, 1 domain failure (invalid model,
non-convergence), 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mbdp import _backend, envs
from mbdp.bench import (
    SweepSpec,
    compare_workers,
    emit_csv,
    iterations_table,
    resolve_environment,
    run_sweep,
    write_trace_csv,
)
from mbdp.io import FormatError, load_mdp, load_values, save_mdp, save_policy, save_values
from mbdp.mdp import validate_mdp
from mbdp.solvers import (
    NonFiniteValueError,
    SolverConfig,
    compute_reference,
    modified_policy_iteration,
    value_iteration,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbdp", description="Mini-batch dynamic programming for finite discounted MDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a benchmark environment as MDP JSON")
    gen.add_argument("env", choices=envs.ENVIRONMENTS)
    gen.add_argument("out", type=Path)
    gen.add_argument("--side", type=int, default=80, help="maze side length N")
    gen.add_argument("--seed", type=int, default=0, help="maze layout seed")
    gen.add_argument("--slip", type=float, default=0.7, help="maze intended-move probability")
    gen.add_argument("--discount", type=float, default=envs.DEFAULT_DISCOUNT)

    solve = sub.add_parser("solve", help="run VI or MPI on an MDP file")
    solve.add_argument("mdp", type=Path)
    solve.add_argument("--algo", choices=("vi", "mpi"), default="vi")
    _solver_flags(solve)
    solve.add_argument("--m", type=_positive_int, default=None,
                       help="batch size (default: all states, i.e. the Bellman operator)")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--no-shuffle", action="store_true",
                       help="process states in index order instead of reshuffling")
    solve.add_argument("--reference", type=Path, default=None,
                       help="value JSON with J*; stop on error instead of residual")
    solve.add_argument("--out", type=Path, default=Path("."))

    bench = sub.add_parser("bench", help="batch-size sweep with CSV output")
    bench.add_argument("--env", required=True, help="frozenlake, taxi, maze or an MDP path")
    bench.add_argument("--algo", choices=("vi", "mpi"), default="vi")
    _solver_flags(bench)
    bench.add_argument("--m", type=_int_list, default=[1], help="comma-separated batch sizes")
    bench.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    bench.add_argument("--side", type=int, default=80, help="maze side length N")
    bench.add_argument("--maze-seed", type=int, default=0)
    bench.add_argument("--worker-check", type=int, default=None, metavar="M",
                       help="also time batch size M with all workers vs one worker")
    bench.add_argument("--out", type=Path, required=True)

    val = sub.add_parser("validate", help="check an MDP file")
    val.add_argument("mdp", type=Path)
    return parser


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=_positive_float, default=1e-4)
    p.add_argument("--max-iters", type=_positive_int, default=100_000)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--K", type=_positive_int, default=None,
                   help="policy-evaluation sweeps per MPI iteration (default 50)")


def _load(path: Path):
    try:
        return load_mdp(path)
    except (OSError, json.JSONDecodeError, FormatError, ValueError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None


def cmd_gen(args) -> int:
    try:
        mdp = envs.build(args.env, side=args.side, seed=args.seed, slip_mass=args.slip,
                         discount=args.discount)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        save_mdp(mdp, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    counts = sorted(set(mdp.action_counts.tolist()))
    print(f"{args.env}: {mdp.n_states} states, actions per state {counts}")
    return EXIT_OK


def cmd_validate(args) -> int:
    mdp = _load(args.mdp)
    if mdp is None:
        return EXIT_USAGE
    report = validate_mdp(mdp)
    if not report:
        print("OK")
        return EXIT_OK
    for v in report:
        print(v)
    return EXIT_FAIL


def cmd_solve(args, parser) -> int:
    if args.K is not None and args.algo != "mpi":
        parser.error("--K is only valid with --algo mpi")
    mdp = _load(args.mdp)
    if mdp is None:
        return EXIT_USAGE
    report = validate_mdp(mdp)
    if report:
        print("invalid MDP:", file=sys.stderr)
        for v in report:
            print(f"  {v}", file=sys.stderr)
        return EXIT_FAIL
    if args.m is not None and args.m > mdp.n_states:
        parser.error(f"--m {args.m} exceeds the number of states ({mdp.n_states})")
    reference = None
    if args.reference is not None:
        try:
            reference = load_values(args.reference)
        except (OSError, json.JSONDecodeError, FormatError) as exc:
            print(f"error: cannot read {args.reference}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if reference.shape != (mdp.n_states,):
            print("error: reference length does not match the MDP", file=sys.stderr)
            return EXIT_USAGE

    config = SolverConfig(batch_size=args.m, shuffle=not args.no_shuffle, seed=args.seed,
                          tolerance=args.tol, max_iterations=args.max_iters,
                          workers=args.workers)
    try:
        if args.algo == "vi":
            sol = value_iteration(mdp, config, reference=reference)
        else:
            sol = modified_policy_iteration(mdp, args.K or 50, config, reference=reference)
    except NonFiniteValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL

    try:
        args.out.mkdir(parents=True, exist_ok=True)
        save_values(sol.value, args.out / "value.json")
        save_policy(sol.policy, args.out / "policy.json")
        write_trace_csv(sol.trace, args.out / "trace.csv")
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = "converged" if sol.converged else "NOT converged"
    print(f"{args.algo.upper()} {status} after {sol.trace.iterations[-1]} iterations "
          f"(backend {_backend.BACKEND}); results in {args.out}")
    return EXIT_OK if sol.converged else EXIT_FAIL


def cmd_bench(args, parser) -> int:
    if args.K is not None and args.algo != "mpi":
        parser.error("--K is only valid with --algo mpi")
    try:
        spec = SweepSpec(environment=args.env, algorithm=args.algo, batch_sizes=args.m,
                         K=args.K or 50, seeds=args.seeds, tolerance=args.tol,
                         workers=args.workers, max_iterations=args.max_iters,
                         maze_side=args.side, maze_seed=args.maze_seed)
    except ValueError as exc:
        parser.error(str(exc))
    if args.env not in envs.ENVIRONMENTS and not Path(args.env).exists():
        print(f"error: unknown environment or missing file {args.env!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        label, mdp = resolve_environment(spec)
        reference = compute_reference(mdp)
        report = run_sweep(spec, mdp=mdp, label=label, reference=reference)
        if args.worker_check is not None:
            report.worker_timing = compare_workers(mdp, reference, m=args.worker_check,
                                                   label=label, tolerance=args.tol,
                                                   workers=args.workers)
    except (OSError, json.JSONDecodeError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    summary = emit_csv(report, args.out)

    print(f"{label}: {mdp.n_states} states, {spec.algorithm}, tol {spec.tolerance:g}")
    for m, iters in iterations_table(report).items():
        print(f"  m={m:<6d} iterations to tol per seed: {iters}")
    if report.worker_timing is not None:
        t = report.worker_timing
        print(f"  workers={t.workers_parallel}: {t.seconds_parallel:.4f}s, "
              f"workers=1: {t.seconds_serial:.4f}s (m={t.m})")
    print(f"summary written to {summary}")
    return EXIT_OK if all(r.converged for r in report.rows) else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen":
        return cmd_gen(args)
    if args.command == "validate":
        return cmd_validate(args)
    if args.command == "solve":
        return cmd_solve(args, parser)
    return cmd_bench(args, parser)


if __name__ == "__main__":
    sys.exit(main())
