"""Mini-batch DP operators.

A :class:`BatchSchedule` fixes the order in which states are visited and
the batch size ``m``. States are processed in consecutive blocks of ``m``
positions of the order. A state reads freshly computed values for states
in strictly earlier blocks and the input values for everything else. With
``m == n`` this is the Bellman backup; with ``m == 1`` it is a
Gauss-Seidel sweep.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mbdp import _backend
from mbdp.mdp import Mdp, _check_values, check_policy


@dataclass(frozen=True, eq=False)
class BatchSchedule:
    """Visiting order (0-based permutation of the states) plus batch size."""

    permutation: np.ndarray
    batch_size: int

    def __post_init__(self):
        perm = np.ascontiguousarray(self.permutation, dtype=np.int64)
        n = len(perm)
        if n == 0:
            raise ValueError("permutation is empty")
        seen = np.zeros(n, dtype=bool)
        if perm.min() < 0 or perm.max() >= n:
            raise ValueError("permutation entries out of range")
        seen[perm] = True
        if not seen.all():
            raise ValueError("permutation is not a bijection")
        if not 1 <= int(self.batch_size) <= n:
            raise ValueError(f"batch_size must be in [1, {n}], got {self.batch_size}")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "batch_size", int(self.batch_size))

    @property
    def n_states(self) -> int:
        return len(self.permutation)

    @classmethod
    def identity(cls, n_states: int, batch_size: int) -> BatchSchedule:
        return cls(np.arange(n_states), batch_size)

    @classmethod
    def shuffled(cls, n_states: int, batch_size: int, rng: np.random.Generator) -> BatchSchedule:
        return cls(rng.permutation(n_states), batch_size)


def batch_partition(schedule: BatchSchedule) -> list[np.ndarray]:
    """Consecutive blocks of ``batch_size`` states; the last may be shorter."""
    m = schedule.batch_size
    perm = schedule.permutation
    return [perm[s:s + m] for s in range(0, len(perm), m)]


def updated_before(schedule: BatchSchedule) -> list[set[int]]:
    """For each state, the set of states already updated when it is processed."""
    out: list[set[int]] = [set() for _ in range(schedule.n_states)]
    done: set[int] = set()
    for batch in batch_partition(schedule):
        for i in batch.tolist():
            out[i] = set(done)
        done.update(batch.tolist())
    return out


def _prepare(mdp: Mdp, J, schedule: BatchSchedule, workers: int | None):
    J = _check_values(mdp, J)
    if schedule.n_states != mdp.n_states:
        raise ValueError(
            f"schedule covers {schedule.n_states} states, MDP has {mdp.n_states}")
    if workers is None:
        workers = _backend.default_workers()
    if workers < 1:
        raise ValueError("workers must be positive")
    return np.ascontiguousarray(J), workers


def apply_minibatch(mdp: Mdp, J, schedule: BatchSchedule, *, workers: int | None = None,
                    backend: str | None = None) -> np.ndarray:
    """One application of the minimizing mini-batch operator to ``J``.

    The result is a new array; ``J`` is not modified. It depends only on
    ``(mdp, J, schedule)``: neither ``workers`` nor the within-batch
    evaluation order changes a single bit of the output.
    """
    J, workers = _prepare(mdp, J, schedule, workers)
    k = _backend.kernels(backend)
    return k.sweep_min(mdp.state_ptr, mdp.costs, mdp.row_ptr, mdp.targets, mdp.probs,
                       mdp.discount, J, schedule.permutation, schedule.batch_size, workers)


def apply_minibatch_policy(mdp: Mdp, J, policy, schedule: BatchSchedule, *,
                           workers: int | None = None,
                           backend: str | None = None) -> np.ndarray:
    """Like :func:`apply_minibatch`, evaluating the action ``policy[i]`` in each state."""
    J, workers = _prepare(mdp, J, schedule, workers)
    mu = np.ascontiguousarray(check_policy(mdp, policy))
    k = _backend.kernels(backend)
    return k.sweep_policy(mdp.state_ptr, mdp.costs, mdp.row_ptr, mdp.targets, mdp.probs,
                          mdp.discount, J, schedule.permutation, schedule.batch_size,
                          workers, mu)
