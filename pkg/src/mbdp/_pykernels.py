"""Pure-Python (numpy) batch-sweep kernels, same contract as ``_ckernels``.

Small batches take a scalar path; larger ones gather every state-action
row of the batch at once. Both paths add the terms of a row left to right,
exactly like the compiled kernels, so the two backends agree bitwise.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

SCALAR_MAX = 8
PARALLEL_MIN = 4096


def _concat_ranges(starts: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of ``[s, s + c)`` ranges laid end to end, plus each range's offset."""
    offsets = np.cumsum(counts) - counts
    idx = np.repeat(starts - offsets, counts) + np.arange(int(counts.sum()))
    return idx, offsets


def _row_q(costs, row_ptr, targets, probs, alpha, w, rows):
    counts = row_ptr[rows + 1] - row_ptr[rows]
    entries, _ = _concat_ranges(row_ptr[rows], counts)
    # add.at applies updates in index order: a left-to-right sum per row
    acc = np.zeros(len(rows))
    np.add.at(acc, np.repeat(np.arange(len(rows)), counts), probs[entries] * w[targets[entries]])
    return costs[rows] + alpha * acc


def _batch_min(state_ptr, costs, row_ptr, targets, probs, alpha, w, states):
    rows, soff = _concat_ranges(state_ptr[states], state_ptr[states + 1] - state_ptr[states])
    q = _row_q(costs, row_ptr, targets, probs, alpha, w, rows)
    return np.minimum.reduceat(q, soff)


def _scalar_min(state_ptr, costs, row_ptr, targets, probs, alpha, w, i):
    best = None
    for a in range(state_ptr[i], state_ptr[i + 1]):
        acc = 0.0
        for t in range(row_ptr[a], row_ptr[a + 1]):
            acc = acc + probs[t] * w[targets[t]]
        q = costs[a] + alpha * acc
        if best is None or q < best:
            best = q
    return best


def _scalar_row(costs, row_ptr, targets, probs, alpha, w, a):
    acc = 0.0
    for t in range(row_ptr[a], row_ptr[a + 1]):
        acc = acc + probs[t] * w[targets[t]]
    return costs[a] + alpha * acc


def _chunked(fn, states, workers, pool):
    if pool is None or len(states) < PARALLEL_MIN:
        return fn(states)
    parts = np.array_split(states, workers)
    return np.concatenate(list(pool.map(fn, parts)))


@np.errstate(over="ignore", invalid="ignore")
def _sweep(values, order, batch_size, workers, scalar_fn, batch_fn):
    # overflow surfaces as inf/nan and is reported by the caller, as with the
    # compiled kernels
    w = np.array(values, dtype=np.float64, copy=True)
    n = len(w)
    pool = ThreadPoolExecutor(workers) if workers > 1 and batch_size >= PARALLEL_MIN else None
    try:
        for start in range(0, n, batch_size):
            states = order[start:start + batch_size]
            if len(states) <= SCALAR_MAX:
                new = [scalar_fn(w, i) for i in states.tolist()]
            else:
                new = _chunked(lambda s: batch_fn(w, s), states, workers, pool)
            w[states] = new
    finally:
        if pool is not None:
            pool.shutdown()
    return w


def sweep_min(state_ptr, costs, row_ptr, targets, probs, alpha, values, order,
              batch_size, workers):
    sp_l, c_l, rp_l, t_l, p_l = (x.tolist() for x in (state_ptr, costs, row_ptr, targets, probs))

    def scalar(w, i):
        return _scalar_min(sp_l, c_l, rp_l, t_l, p_l, alpha, w, i)

    def batch(w, states):
        return _batch_min(state_ptr, costs, row_ptr, targets, probs, alpha, w, states)

    return _sweep(values, np.asarray(order), batch_size, workers, scalar, batch)


def sweep_policy(state_ptr, costs, row_ptr, targets, probs, alpha, values, order,
                 batch_size, workers, choices):
    rows_of_state = state_ptr[:-1] + choices
    rows_l = rows_of_state.tolist()
    c_l, rp_l, t_l, p_l = (x.tolist() for x in (costs, row_ptr, targets, probs))

    def scalar(w, i):
        return _scalar_row(c_l, rp_l, t_l, p_l, alpha, w, rows_l[i])

    def batch(w, states):
        return _row_q(costs, row_ptr, targets, probs, alpha, w, rows_of_state[states])

    return _sweep(values, np.asarray(order), batch_size, workers, scalar, batch)
