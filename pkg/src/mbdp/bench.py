"""Batch-size sweep harness.

A sweep computes ``J*`` once with exact policy iteration, then runs VI or
MPI with shuffling for every ``(batch_size, seed)`` cell, measuring the
error against ``J*`` after every iteration. Cells run one at a time so the
timings are not contended.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from mbdp import _backend, envs
from mbdp.io import load_mdp
from mbdp.mdp import Mdp
from mbdp.solvers import (
    ConvergenceTrace,
    SolverConfig,
    compute_reference,
    modified_policy_iteration,
    value_iteration,
)

TRACE_HEADER = ("iteration", "error_sup", "residual_sup", "elapsed_seconds")
SUMMARY_HEADER = ("env", "algorithm", "m", "seed", "iters_to_tol", "seconds_to_tol",
                  "converged", "n_states", "workers")
WORKERS_HEADER = ("env", "m", "workers_parallel", "seconds_parallel", "seconds_serial",
                  "parallel_not_slower")


@dataclass
class SweepSpec:
    environment: str
    algorithm: str = "VI"
    batch_sizes: list[int] = field(default_factory=lambda: [1])
    K: int = 50
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    tolerance: float = 1e-4
    workers: int | None = None
    max_iterations: int = 100_000
    maze_side: int = 80
    maze_seed: int = 0

    def __post_init__(self):
        self.algorithm = self.algorithm.upper()
        if self.algorithm not in ("VI", "MPI"):
            raise ValueError(f"algorithm must be VI or MPI, got {self.algorithm!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.batch_sizes:
            raise ValueError("at least one batch size is required")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class BenchRow:
    env: str
    algorithm: str
    m: int
    seed: int
    trace: ConvergenceTrace
    iters_to_tol: int | None
    seconds_to_tol: float | None
    converged: bool
    n_states: int
    workers: int


@dataclass
class WorkerTiming:
    """Wall time to tolerance for one batch size with a parallel vs a single worker."""

    env: str
    m: int
    workers_parallel: int
    seconds_parallel: float
    seconds_serial: float

    @property
    def parallel_not_slower(self) -> bool:
        return self.seconds_parallel <= self.seconds_serial


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    worker_timing: WorkerTiming | None = None


def resolve_environment(spec: SweepSpec) -> tuple[str, Mdp]:
    """Return ``(label, mdp)`` for a named environment or an MDP file path."""
    name = spec.environment
    if name in envs.ENVIRONMENTS:
        mdp = envs.build(name, side=spec.maze_side, seed=spec.maze_seed)
        label = f"maze{spec.maze_side}" if name == "maze" else name
        return label, mdp
    path = Path(name)
    return path.stem, load_mdp(path)


def _run_cell(mdp, spec: SweepSpec, m: int, seed: int, reference, workers: int):
    config = SolverConfig(batch_size=m, shuffle=True, seed=seed, tolerance=spec.tolerance,
                          max_iterations=spec.max_iterations, workers=workers)
    if spec.algorithm == "VI":
        return value_iteration(mdp, config, reference=reference)
    return modified_policy_iteration(mdp, spec.K, config, reference=reference)


def run_sweep(spec: SweepSpec, mdp: Mdp | None = None, label: str | None = None,
              reference=None) -> BenchReport:
    """Run every ``(batch_size, seed)`` cell of ``spec``.

    ``mdp``/``reference`` may be passed in to skip loading and the exact
    solve. Non-convergence within ``max_iterations`` is recorded, not raised.
    """
    if mdp is None:
        label, mdp = resolve_environment(spec)
    label = label or spec.environment
    for m in spec.batch_sizes:
        if not 1 <= m <= mdp.n_states:
            raise ValueError(f"batch size {m} outside [1, {mdp.n_states}]")
    if reference is None:
        reference = compute_reference(mdp)
    workers = spec.workers or _backend.default_workers()

    report = BenchReport()
    for m in spec.batch_sizes:
        for seed in spec.seeds:
            sol = _run_cell(mdp, spec, m, seed, reference, workers)
            report.rows.append(BenchRow(
                env=label, algorithm=spec.algorithm, m=m, seed=seed, trace=sol.trace,
                iters_to_tol=sol.trace.iterations_to(spec.tolerance),
                seconds_to_tol=sol.trace.seconds_to(spec.tolerance),
                converged=sol.converged, n_states=mdp.n_states, workers=workers,
            ))
    return report


def compare_workers(mdp: Mdp, reference, *, m: int = 512, label: str = "",
                    tolerance: float = 1e-4, seed: int = 0, repeats: int = 3,
                    workers: int | None = None) -> WorkerTiming:
    """Best-of-``repeats`` VI wall time to tolerance, parallel vs one worker.

    When the hardware offers a single worker, both settings are the same
    run and it is measured once.
    """
    parallel = workers or _backend.default_workers()
    m = min(m, mdp.n_states)

    def best(w: int) -> float:
        times = []
        for _ in range(repeats):
            config = SolverConfig(batch_size=m, seed=seed, tolerance=tolerance, workers=w)
            sol = value_iteration(mdp, config, reference=reference)
            times.append(sol.trace.seconds_to(tolerance))
        return min(times)

    serial = best(1)
    par = serial if parallel == 1 else best(parallel)
    return WorkerTiming(label, m, parallel, par, serial)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def trace_filename(row: BenchRow) -> str:
    return f"trace_{row.env}_{row.algorithm.lower()}_m{row.m}_seed{row.seed}.csv"


def write_trace_csv(trace: ConvergenceTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for rec in zip(trace.iterations, trace.errors, trace.residuals, trace.elapsed):
            w.writerow([_fmt(x) for x in rec])


def emit_csv(report: BenchReport, out_dir) -> Path:
    """Write one trace CSV per row plus ``summary.csv`` (and ``workers.csv``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for row in report.rows:
        write_trace_csv(row.trace, out / trace_filename(row))
    summary = out / "summary.csv"
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in report.rows:
            w.writerow([_fmt(x) for x in (r.env, r.algorithm, r.m, r.seed, r.iters_to_tol,
                                          r.seconds_to_tol, r.converged, r.n_states,
                                          r.workers)])
    if report.worker_timing is not None:
        t = report.worker_timing
        with open(out / "workers.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(WORKERS_HEADER)
            w.writerow([_fmt(x) for x in (t.env, t.m, t.workers_parallel, t.seconds_parallel,
                                          t.seconds_serial, t.parallel_not_slower)])
    return summary


def envelope_violations(trace: ConvergenceTrace, discount: float,
                        slack: float = 1e-9) -> list[int]:
    """Iterations where ``error(k) > discount**k * error(0) + slack``."""
    e0 = trace.errors[0]
    return [k for k, e in zip(trace.iterations, trace.errors)
            if e > discount ** k * e0 + slack]


def iterations_table(report: BenchReport) -> dict[int, list[int | None]]:
    """``batch_size -> [iters_to_tol per seed]`` in seed order."""
    table: dict[int, list[int | None]] = {}
    for r in report.rows:
        table.setdefault(r.m, []).append(r.iters_to_tol)
    return table


__all__ = [
    "BenchReport", "BenchRow", "SweepSpec", "WorkerTiming", "compare_workers", "emit_csv",
    "envelope_violations", "iterations_table", "resolve_environment", "run_sweep",
    "write_trace_csv",
]
