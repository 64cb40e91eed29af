"""Value iteration, policy iteration and modified policy iteration.

VI and MPI run over the mini-batch operators; the batch size and the
shuffling policy come from :class:`SolverConfig`. Exact policy iteration
is the reference oracle used for ground-truth ``J*``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from mbdp.mdp import Mdp, check_mdp, greedy_policy, policy_rows, q_table, sup_norm_diff
from mbdp.operators import BatchSchedule, apply_minibatch, apply_minibatch_policy

DIRECT_SOLVE_MAX = 20_000
REFERENCE_RESIDUAL_TOL = 1e-8


class NonFiniteValueError(FloatingPointError):
    """The iterate left the reals; usually a malformed model."""


@dataclass
class SolverConfig:
    """Settings shared by VI and MPI.

    ``batch_size=None`` means a full batch (the plain Bellman operator).
    With ``shuffle`` a fresh uniform permutation is drawn from
    ``numpy.random.default_rng(seed)`` (PCG64, Fisher-Yates shuffle)
    before every operator application; otherwise states go in index order.
    """

    batch_size: int | None = None
    shuffle: bool = True
    seed: int = 0
    tolerance: float = 1e-4
    max_iterations: int = 100_000
    workers: int | None = None

    def __post_init__(self):
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolve_batch_size(self, n_states: int) -> int:
        m = n_states if self.batch_size is None else self.batch_size
        if not 1 <= m <= n_states:
            raise ValueError(f"batch_size {m} outside [1, {n_states}]")
        return m


@dataclass
class ConvergenceTrace:
    """Per-iteration records. Index 0 is the initial iterate.

    ``errors`` is NaN when no reference was supplied; ``residuals[0]`` is NaN.
    ``elapsed`` is cumulative solve time in seconds.
    """

    iterations: list[int] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    elapsed: list[float] = field(default_factory=list)

    def record(self, k: int, error: float, residual: float, elapsed: float) -> None:
        self.iterations.append(k)
        self.errors.append(error)
        self.residuals.append(residual)
        self.elapsed.append(elapsed)

    def __len__(self) -> int:
        return len(self.iterations)

    def first_below(self, tolerance: float, use_error: bool = True) -> int | None:
        """Position of the first record whose error (or residual) is <= tolerance."""
        column = self.errors if use_error else self.residuals
        for pos, v in enumerate(column):
            if v <= tolerance:
                return pos
        return None

    def iterations_to(self, tolerance: float) -> int | None:
        pos = self.first_below(tolerance)
        return None if pos is None else self.iterations[pos]

    def seconds_to(self, tolerance: float) -> float | None:
        pos = self.first_below(tolerance)
        return None if pos is None else self.elapsed[pos]


@dataclass
class Solution:
    value: np.ndarray
    policy: np.ndarray
    trace: ConvergenceTrace
    converged: bool


class _Schedules:
    """Hands out one schedule per operator application."""

    def __init__(self, n: int, config: SolverConfig):
        self.n = n
        self.m = config.resolve_batch_size(n)
        self.rng = np.random.default_rng(config.seed) if config.shuffle else None
        self._fixed = None if config.shuffle else BatchSchedule.identity(n, self.m)

    def next(self) -> BatchSchedule:
        if self.rng is None:
            return self._fixed
        return BatchSchedule.shuffled(self.n, self.m, self.rng)


def _error(J, reference) -> float:
    return math.nan if reference is None else sup_norm_diff(J, reference)


def _check_finite(J, k: int) -> None:
    if not np.all(np.isfinite(J)):
        bad = np.flatnonzero(~np.isfinite(J))
        raise NonFiniteValueError(
            f"non-finite value at iteration {k} in states {(bad[:10] + 1).tolist()} "
            "(1-based); check for unbounded costs or broken transition rows")


def _prepare_reference(mdp: Mdp, reference):
    if reference is None:
        return None
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape != (mdp.n_states,):
        raise ValueError("reference has the wrong length")
    return reference


def value_iteration(mdp: Mdp, config: SolverConfig | None = None,
                    reference=None) -> Solution:
    """Iterate the mini-batch operator from ``J = 0``.

    Stops once the sup-norm error against ``reference`` (when given) or the
    successive-iterate residual drops to ``config.tolerance``.
    """
    config = config or SolverConfig()
    check_mdp(mdp)
    reference = _prepare_reference(mdp, reference)
    schedules = _Schedules(mdp.n_states, config)

    J = np.zeros(mdp.n_states)
    trace = ConvergenceTrace()
    err = _error(J, reference)
    trace.record(0, err, math.nan, 0.0)
    converged = reference is not None and err <= config.tolerance
    clock = 0.0
    k = 0
    while not converged and k < config.max_iterations:
        k += 1
        schedule = schedules.next()
        t0 = time.perf_counter()
        J_new = apply_minibatch(mdp, J, schedule, workers=config.workers)
        clock += time.perf_counter() - t0
        _check_finite(J_new, k)
        residual = sup_norm_diff(J_new, J)
        err = _error(J_new, reference)
        trace.record(k, err, residual, clock)
        J = J_new
        converged = (err if reference is not None else residual) <= config.tolerance

    return Solution(J, greedy_policy(mdp, J), trace, converged)


def exact_policy_evaluation(mdp: Mdp, policy) -> np.ndarray:
    """Solve ``(I - discount * P_mu) J = g_mu``.

    Uses a sparse LU solve up to ``DIRECT_SOLVE_MAX`` states and Gauss-Seidel
    sweeps of the policy operator beyond that.
    """
    rows = policy_rows(mdp, policy)
    n = mdp.n_states
    g = mdp.costs[rows]
    if n <= DIRECT_SOLVE_MAX:
        P = mdp.transition_matrix[rows]
        A = (sp.identity(n, format="csc") - mdp.discount * P).tocsc()
        J = np.atleast_1d(spla.spsolve(A, g))
    else:
        schedule = BatchSchedule.identity(n, 1)
        J = np.zeros(n)
        while True:
            J_new = apply_minibatch_policy(mdp, J, policy, schedule)
            done = sup_norm_diff(J_new, J) <= 1e-10
            J = J_new
            if done:
                break
    if not np.all(np.isfinite(J)):
        raise NonFiniteValueError("policy evaluation produced non-finite values")
    return J


def _improve(mdp: Mdp, J, current) -> np.ndarray:
    """Greedy step that keeps the current action unless another is strictly
    better by more than rounding noise; prevents cycling on near-ties."""
    q = q_table(mdp, J)
    greedy = greedy_policy(mdp, J)
    starts = mdp.state_ptr[:-1]
    q_cur = q[starts + current]
    q_best = q[starts + greedy]
    slack = 1e-12 * np.maximum(1.0, np.abs(q_best))
    return np.where(q_cur <= q_best + slack, current, greedy)


def policy_iteration(mdp: Mdp, max_iterations: int = 10_000) -> Solution:
    """Exact PI starting from the policy greedy w.r.t. ``J = 0``."""
    check_mdp(mdp)
    trace = ConvergenceTrace()
    J = np.zeros(mdp.n_states)
    mu = greedy_policy(mdp, J)
    trace.record(0, math.nan, math.nan, 0.0)
    clock = 0.0
    for k in range(1, max_iterations + 1):
        t0 = time.perf_counter()
        J_new = exact_policy_evaluation(mdp, mu)
        new_mu = _improve(mdp, J_new, mu)
        clock += time.perf_counter() - t0
        trace.record(k, math.nan, sup_norm_diff(J_new, J), clock)
        J = J_new
        if np.array_equal(new_mu, mu):
            return Solution(J, mu, trace, True)
        mu = new_mu
    return Solution(J, mu, trace, False)


def modified_policy_iteration(mdp: Mdp, K: int, config: SolverConfig | None = None,
                              reference=None) -> Solution:
    """MPI with ``K`` warm-started mini-batch policy-operator steps per outer iteration.

    One trace record per outer iteration. Terminates when the greedy policy
    is unchanged AND the error (or residual) criterion holds.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    config = config or SolverConfig()
    check_mdp(mdp)
    reference = _prepare_reference(mdp, reference)
    schedules = _Schedules(mdp.n_states, config)

    J = np.zeros(mdp.n_states)
    mu = greedy_policy(mdp, J)
    trace = ConvergenceTrace()
    trace.record(0, _error(J, reference), math.nan, 0.0)
    clock = 0.0
    converged = False
    k = 0
    while not converged and k < config.max_iterations:
        k += 1
        t0 = time.perf_counter()
        J_new = J
        for _ in range(K):
            J_new = apply_minibatch_policy(mdp, J_new, mu, schedules.next(),
                                           workers=config.workers)
        new_mu = greedy_policy(mdp, J_new)
        clock += time.perf_counter() - t0
        _check_finite(J_new, k)
        residual = sup_norm_diff(J_new, J)
        err = _error(J_new, reference)
        trace.record(k, err, residual, clock)
        stable = np.array_equal(new_mu, mu)
        J, mu = J_new, new_mu
        criterion = err if reference is not None else residual
        converged = stable and criterion <= config.tolerance

    return Solution(J, mu, trace, converged)


def bellman_residual(mdp: Mdp, J) -> float:
    """``||T J - J||_inf`` using the full Bellman backup."""
    schedule = BatchSchedule.identity(mdp.n_states, mdp.n_states)
    return sup_norm_diff(apply_minibatch(mdp, J, schedule, workers=1), J)


def compute_reference(mdp: Mdp) -> np.ndarray:
    """Optimal cost ``J*`` from exact PI, with its fixed-point residual checked."""
    sol = policy_iteration(mdp)
    if not sol.converged:
        raise RuntimeError("policy iteration did not converge")
    residual = bellman_residual(mdp, sol.value)
    if residual > REFERENCE_RESIDUAL_TOL:
        raise RuntimeError(f"reference fixed-point residual {residual:.3e} exceeds "
                           f"{REFERENCE_RESIDUAL_TOL:.0e}")
    return sol.value


__all__ = [
    "ConvergenceTrace", "NonFiniteValueError", "Solution", "SolverConfig",
    "bellman_residual", "compute_reference", "exact_policy_evaluation",
    "modified_policy_iteration", "policy_iteration", "value_iteration",
]
