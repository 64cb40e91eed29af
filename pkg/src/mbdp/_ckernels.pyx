# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch-sweep kernels.

Each state's backup is summed sequentially by exactly one thread, so
results do not depend on ``workers``. Batches run in order; within a batch
new values are staged and only published after the whole batch is done.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY
from libc.stdint cimport int64_t

cnp.import_array()

# Below this many states per batch the OpenMP fork/join costs more than it saves.
cdef enum:
    PARALLEL_MIN = 64


cdef inline double _backup_min(
    const int64_t[::1] state_ptr,
    const double[::1] costs,
    const int64_t[::1] row_ptr,
    const int64_t[::1] targets,
    const double[::1] probs,
    double alpha,
    const double[::1] w,
    int64_t i,
) noexcept nogil:
    cdef int64_t a, t
    cdef double acc, q
    cdef double best = INFINITY
    for a in range(state_ptr[i], state_ptr[i + 1]):
        acc = 0.0
        for t in range(row_ptr[a], row_ptr[a + 1]):
            acc = acc + probs[t] * w[targets[t]]
        q = costs[a] + alpha * acc
        if q < best or a == state_ptr[i]:
            best = q
    return best


cdef inline double _backup_row(
    const double[::1] costs,
    const int64_t[::1] row_ptr,
    const int64_t[::1] targets,
    const double[::1] probs,
    double alpha,
    const double[::1] w,
    int64_t a,
) noexcept nogil:
    cdef int64_t t
    cdef double acc = 0.0
    for t in range(row_ptr[a], row_ptr[a + 1]):
        acc = acc + probs[t] * w[targets[t]]
    return costs[a] + alpha * acc


def sweep_min(
    const int64_t[::1] state_ptr,
    const double[::1] costs,
    const int64_t[::1] row_ptr,
    const int64_t[::1] targets,
    const double[::1] probs,
    double alpha,
    const double[::1] values,
    const int64_t[::1] order,
    Py_ssize_t batch_size,
    int workers,
):
    cdef Py_ssize_t n = values.shape[0]
    out = np.array(values, dtype=np.float64, copy=True)
    stage_arr = np.empty(batch_size, dtype=np.float64)
    cdef double[::1] w = out
    cdef double[::1] stage = stage_arr
    cdef Py_ssize_t start, stop, p
    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            if workers > 1 and stop - start >= PARALLEL_MIN:
                for p in prange(start, stop, num_threads=workers, schedule="static"):
                    stage[p - start] = _backup_min(
                        state_ptr, costs, row_ptr, targets, probs, alpha, w, order[p])
            else:
                for p in range(start, stop):
                    stage[p - start] = _backup_min(
                        state_ptr, costs, row_ptr, targets, probs, alpha, w, order[p])
            for p in range(start, stop):
                w[order[p]] = stage[p - start]
            start = stop
    return out


def sweep_policy(
    const int64_t[::1] state_ptr,
    const double[::1] costs,
    const int64_t[::1] row_ptr,
    const int64_t[::1] targets,
    const double[::1] probs,
    double alpha,
    const double[::1] values,
    const int64_t[::1] order,
    Py_ssize_t batch_size,
    int workers,
    const int64_t[::1] choices,
):
    cdef Py_ssize_t n = values.shape[0]
    out = np.array(values, dtype=np.float64, copy=True)
    stage_arr = np.empty(batch_size, dtype=np.float64)
    cdef double[::1] w = out
    cdef double[::1] stage = stage_arr
    cdef Py_ssize_t start, stop, p
    cdef int64_t i
    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            if workers > 1 and stop - start >= PARALLEL_MIN:
                for p in prange(start, stop, num_threads=workers, schedule="static"):
                    stage[p - start] = _backup_row(
                        costs, row_ptr, targets, probs, alpha, w,
                        state_ptr[order[p]] + choices[order[p]])
            else:
                for p in range(start, stop):
                    i = order[p]
                    stage[p - start] = _backup_row(
                        costs, row_ptr, targets, probs, alpha, w, state_ptr[i] + choices[i])
            for p in range(start, stop):
                w[order[p]] = stage[p - start]
            start = stop
    return out
