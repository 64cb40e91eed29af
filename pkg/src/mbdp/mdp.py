"""Finite discounted MDP model with sparse transition kernels.

Storage is a two-level CSR layout. State ``i`` owns the state-action rows
``state_ptr[i]:state_ptr[i + 1]``; row ``a`` owns the transition entries
``row_ptr[a]:row_ptr[a + 1]`` of ``targets`` and ``probs``. Indices are
0-based in memory and 1-based in files and messages.

Value functions are plain float64 vectors of length ``n_states`` and
policies are int64 vectors holding, per state, an index into that state's
action list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ActionEntry:
    """One admissible action: stage cost plus sparse ``(target, prob)`` list.

    Targets are 0-based.
    """

    cost: float
    transitions: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "transitions", tuple((int(j), float(p)) for j, p in self.transitions)
        )
        object.__setattr__(self, "cost", float(self.cost))


@dataclass(frozen=True)
class Violation:
    """A single failed invariant. ``state``/``action`` are 0-based or None."""

    message: str
    state: int | None = None
    action: int | None = None

    def __str__(self) -> str:
        return self.message


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    """Immutable finite MDP.

    Construction only checks that the arrays are structurally consistent;
    use :func:`validate_mdp` for the semantic invariants (discount range,
    stochastic rows, target range, finite costs).
    """

    discount: float
    state_ptr: np.ndarray
    costs: np.ndarray
    row_ptr: np.ndarray
    targets: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "discount", float(self.discount))
        conv = {
            "state_ptr": np.int64,
            "costs": np.float64,
            "row_ptr": np.int64,
            "targets": np.int64,
            "probs": np.float64,
        }
        for name, dtype in conv.items():
            arr = np.asarray(getattr(self, name), dtype=dtype)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            object.__setattr__(self, name, _readonly(arr))

        if len(self.state_ptr) < 2 or self.state_ptr[0] != 0:
            raise ValueError("state_ptr must start at 0 and describe at least one state")
        if np.any(np.diff(self.state_ptr) < 0):
            raise ValueError("state_ptr must be nondecreasing")
        if self.state_ptr[-1] != len(self.costs):
            raise ValueError("state_ptr[-1] must equal the number of state-action rows")
        if len(self.row_ptr) != len(self.costs) + 1 or self.row_ptr[0] != 0:
            raise ValueError("row_ptr must have one more entry than costs and start at 0")
        if np.any(np.diff(self.row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if self.row_ptr[-1] != len(self.targets) or len(self.targets) != len(self.probs):
            raise ValueError("row_ptr[-1], targets and probs lengths disagree")

    @classmethod
    def from_actions(cls, discount: float, actions: Sequence[Sequence[ActionEntry]]) -> Mdp:
        """Build from per-state action lists (0-based targets)."""
        state_ptr = [0]
        costs: list[float] = []
        row_ptr = [0]
        targets: list[int] = []
        probs: list[float] = []
        for state_actions in actions:
            for entry in state_actions:
                costs.append(entry.cost)
                for j, p in entry.transitions:
                    targets.append(j)
                    probs.append(p)
                row_ptr.append(len(targets))
            state_ptr.append(len(costs))
        return cls(discount, state_ptr, costs, row_ptr, targets, probs)

    def to_actions(self) -> list[list[ActionEntry]]:
        out = []
        for i in range(self.n_states):
            entries = []
            for a in range(self.state_ptr[i], self.state_ptr[i + 1]):
                lo, hi = self.row_ptr[a], self.row_ptr[a + 1]
                entries.append(
                    ActionEntry(
                        float(self.costs[a]),
                        tuple(zip(self.targets[lo:hi].tolist(), self.probs[lo:hi].tolist())),
                    )
                )
            out.append(entries)
        return out

    @property
    def n_states(self) -> int:
        return len(self.state_ptr) - 1

    @property
    def n_pairs(self) -> int:
        return len(self.costs)

    @cached_property
    def action_counts(self) -> np.ndarray:
        return _readonly(np.diff(self.state_ptr))

    @cached_property
    def pair_state(self) -> np.ndarray:
        """State index owning each state-action row."""
        return _readonly(np.repeat(np.arange(self.n_states), self.action_counts))

    @cached_property
    def transition_matrix(self) -> sp.csr_matrix:
        """``(n_pairs, n_states)`` sparse matrix of transition probabilities."""
        return sp.csr_matrix(
            (self.probs, self.targets, self.row_ptr), shape=(self.n_pairs, self.n_states)
        )

    def pair_index(self, i: int, u: int) -> int:
        if not 0 <= i < self.n_states:
            raise IndexError(f"state {i} out of range for {self.n_states} states")
        if not 0 <= u < self.action_counts[i]:
            raise IndexError(f"action {u} out of range for state {i}")
        return int(self.state_ptr[i] + u)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return self.discount == other.discount and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("state_ptr", "costs", "row_ptr", "targets", "probs")
        )

    __hash__ = None  # type: ignore[assignment]


def validate_mdp(mdp: Mdp) -> list[Violation]:
    """Return every invariant violation; an empty list means the model is valid."""
    report: list[Violation] = []
    if not (0.0 < mdp.discount < 1.0):
        report.append(Violation(f"discount not in (0,1): got {mdp.discount!r}"))

    n = mdp.n_states
    for i in np.flatnonzero(mdp.action_counts == 0):
        report.append(Violation(f"state {i + 1} has no actions", state=int(i)))

    row_of_entry = np.repeat(np.arange(mdp.n_pairs), np.diff(mdp.row_ptr))
    out_of_range = (mdp.targets < 0) | (mdp.targets >= n)
    bad_prob = ~np.isfinite(mdp.probs) | (mdp.probs < 0) | (mdp.probs > 1)
    sums = np.zeros(mdp.n_pairs)
    np.add.at(sums, row_of_entry, mdp.probs)
    order = np.lexsort((mdp.targets, row_of_entry))
    same = (np.diff(row_of_entry[order]) == 0) & (np.diff(mdp.targets[order]) == 0)
    dup_rows = set(row_of_entry[order][1:][same].tolist())

    suspects = set(np.flatnonzero(~np.isfinite(mdp.costs)).tolist())
    suspects |= set(row_of_entry[out_of_range | bad_prob].tolist())
    suspects |= set(np.flatnonzero(~(np.abs(sums - 1.0) <= PROB_SUM_TOL)).tolist())
    suspects |= dup_rows

    for a in sorted(suspects):
        i = int(mdp.pair_state[a])
        u = int(a - mdp.state_ptr[i])
        where = f"(state {i + 1}, action {u + 1})"
        cost = float(mdp.costs[a])
        if not math.isfinite(cost):
            report.append(Violation(f"cost {cost!r} is not finite at {where}", i, u))
        lo, hi = mdp.row_ptr[a], mdp.row_ptr[a + 1]
        for j in mdp.targets[lo:hi][out_of_range[lo:hi]]:
            report.append(Violation(f"target {j + 1} out of range [1, {n}] at {where}", i, u))
        if a in dup_rows:
            report.append(Violation(f"duplicate transition targets at {where}", i, u))
        if bad_prob[lo:hi].any():
            report.append(Violation(f"probabilities outside [0,1] at {where}", i, u))
        if not abs(sums[a] - 1.0) <= PROB_SUM_TOL:
            report.append(Violation(f"probabilities sum to {sums[a]:.12g} ≠ 1 at {where}", i, u))
    return report


def check_mdp(mdp: Mdp) -> None:
    """Raise :class:`InvalidMdpError` listing all violations, if any."""
    report = validate_mdp(mdp)
    if report:
        raise InvalidMdpError(report)


class InvalidMdpError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("invalid MDP:\n" + "\n".join(f"  {v}" for v in violations))


def _check_values(mdp: Mdp, J) -> np.ndarray:
    J = np.asarray(J, dtype=np.float64)
    if J.shape != (mdp.n_states,):
        raise ValueError(f"value function has shape {J.shape}, expected ({mdp.n_states},)")
    return J


def q_value(mdp: Mdp, J, i: int, u: int) -> float:
    """``g(i,u) + discount * sum_j p_ij(u) J(j)`` for 0-based ``i``, ``u``."""
    J = _check_values(mdp, J)
    a = mdp.pair_index(i, u)
    acc = 0.0
    for t in range(mdp.row_ptr[a], mdp.row_ptr[a + 1]):
        acc += mdp.probs[t] * J[mdp.targets[t]]
    return float(mdp.costs[a] + mdp.discount * acc)


def q_table(mdp: Mdp, J) -> np.ndarray:
    """Q-values of every state-action row, aligned with ``mdp.costs``."""
    J = _check_values(mdp, J)
    return mdp.costs + mdp.discount * (mdp.transition_matrix @ J)


def greedy_policy(mdp: Mdp, J) -> np.ndarray:
    """Per-state argmin of the Q-values; ties go to the lowest action index."""
    q = q_table(mdp, J)
    starts = mdp.state_ptr[:-1]
    mins = np.minimum.reduceat(q, starts)
    hits = np.flatnonzero(q == np.repeat(mins, mdp.action_counts))
    _, first = np.unique(mdp.pair_state[hits], return_index=True)
    return (hits[first] - starts).astype(np.int64)


def check_policy(mdp: Mdp, policy) -> np.ndarray:
    mu = np.asarray(policy)
    if mu.shape != (mdp.n_states,) or not np.issubdtype(mu.dtype, np.integer):
        raise ValueError(f"policy must be an integer vector of length {mdp.n_states}")
    if np.any(mu < 0) or np.any(mu >= mdp.action_counts):
        raise ValueError("policy selects an action outside some state's action set")
    return mu.astype(np.int64)


def policy_rows(mdp: Mdp, policy) -> np.ndarray:
    """State-action row selected by ``policy`` in each state."""
    return mdp.state_ptr[:-1] + check_policy(mdp, policy)


def sup_norm_diff(J, J2) -> float:
    J = np.asarray(J, dtype=np.float64)
    J2 = np.asarray(J2, dtype=np.float64)
    if J.shape != J2.shape:
        raise ValueError(f"length mismatch: {J.shape} vs {J2.shape}")
    if J.size == 0:
        return 0.0
    return float(np.max(np.abs(J - J2)))
