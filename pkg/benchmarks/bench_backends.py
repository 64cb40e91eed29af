"""Time one operator application per backend and batch size.

    python3 benchmarks/bench_backends.py --side 80 --m 1,64,512,n --repeats 5

Prints a table with the best time per sweep for the compiled and the numpy
kernels and their ratio. ``--csv`` also writes the rows to a file.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from mbdp import _backend
from mbdp.envs import MazeParams, build_maze, build_taxi
from mbdp.operators import BatchSchedule, apply_minibatch


def best_time(mdp, J, schedule, backend: str, workers: int, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        apply_minibatch(mdp, J, schedule, workers=workers, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times)


def parse_sizes(text: str, n: int) -> list[int]:
    out = []
    for tok in text.split(","):
        m = n if tok.strip() == "n" else int(tok)
        if 1 <= m <= n:
            out.append(m)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=80, help="maze side length")
    ap.add_argument("--m", default="1,8,64,512,n", help="batch sizes; 'n' means all states")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--csv", default=None, help="optional output CSV path")
    args = ap.parse_args(argv)

    backends = _backend.available()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy fallback is timed", file=sys.stderr)
    workers = args.workers or _backend.default_workers()
    rng = np.random.default_rng(0)
    rows = []
    for label, mdp in (("taxi", build_taxi()),
                       (f"maze{args.side}", build_maze(MazeParams(side=args.side)))):
        J = rng.normal(size=mdp.n_states)
        for m in parse_sizes(args.m, mdp.n_states):
            schedule = BatchSchedule.shuffled(mdp.n_states, m, rng)
            t = {b: best_time(mdp, J, schedule, b, workers, args.repeats) for b in backends}
            rows.append((label, mdp.n_states, m, workers, t.get("cython"), t["python"]))

    print(f"{'env':<10}{'n':>7}{'m':>7}{'cython s':>12}{'python s':>12}{'ratio':>9}")
    for label, n, m, _, tc, tp in rows:
        ratio = f"{tp / tc:9.1f}" if tc else f"{'-':>9}"
        tc_s = f"{tc:12.6f}" if tc else f"{'-':>12}"
        print(f"{label:<10}{n:>7}{m:>7}{tc_s}{tp:12.6f}{ratio}")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["env", "n_states", "m", "workers", "cython_seconds", "python_seconds"])
            for r in rows:
                w.writerow(["" if x is None else x for x in r])
    return 0


if __name__ == "__main__":
    sys.exit(main())
