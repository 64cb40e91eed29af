import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdp.envs import build_frozenlake, build_taxi, random_mdp
from mbdp.mdp import ActionEntry, InvalidMdpError, Mdp, q_table, sup_norm_diff
from mbdp.operators import BatchSchedule, apply_minibatch_policy
from mbdp.solvers import (
    NonFiniteValueError,
    SolverConfig,
    bellman_residual,
    compute_reference,
    exact_policy_evaluation,
    modified_policy_iteration,
    policy_iteration,
    value_iteration,
)

from conftest import single_state, two_state_chain


def q_gap(mdp, J_star, policy):
    """Per-state Q(i, policy(i)) - min_u Q(i, u) under J*."""
    q = q_table(mdp, J_star)
    starts = mdp.state_ptr[:-1]
    best = np.minimum.reduceat(q, starts)
    return q[starts + policy] - best


def test_vi_single_state_geometric_series():
    sol = value_iteration(single_state(discount=0.95),
                          SolverConfig(tolerance=1e-6, shuffle=False))
    assert sol.converged
    assert sol.value[0] == pytest.approx(20.0, abs=1e-4)
    assert sol.trace.residuals[-1] <= 1e-6


def test_vi_two_state_chain_gauss_seidel():
    sol = value_iteration(two_state_chain(), SolverConfig(batch_size=1, shuffle=False,
                                                         tolerance=1e-10))
    assert sol.converged
    # J = 0 is already the fixed point for state 1; state 2 then reads it
    assert sol.value.tolist() == [0.0, 1.0]


def test_vi_trace_shape_and_invariants():
    mdp = build_frozenlake()
    ref = compute_reference(mdp)
    sol = value_iteration(mdp, SolverConfig(batch_size=8, seed=3), reference=ref)
    t = sol.trace
    assert t.iterations == list(range(len(t)))
    assert all(b >= a for a, b in zip(t.elapsed, t.elapsed[1:]))
    assert math.isnan(t.residuals[0])
    assert t.errors[0] == pytest.approx(20000.0)
    assert sol.converged and t.errors[-1] <= 1e-4
    assert t.iterations_to(1e-4) == t.iterations[-1]


def test_vi_error_envelope_and_monotone_from_below():
    rng = np.random.default_rng(0)
    for seed in range(10):
        mdp = random_mdp(seed, 15, nonnegative=True)
        ref = compute_reference(mdp)
        m = int(rng.integers(1, 16))
        sol = value_iteration(mdp, SolverConfig(batch_size=m, shuffle=False, tolerance=1e-8),
                              reference=ref)
        a = mdp.discount
        for k, e in zip(sol.trace.iterations, sol.trace.errors):
            assert e <= a**k * sol.trace.errors[0] + 1e-9
        # replay the iterates: nondecreasing and below J*
        J = np.zeros(15)
        from mbdp.operators import apply_minibatch
        s = BatchSchedule.identity(15, m)
        for _ in range(30):
            J_new = apply_minibatch(mdp, J, s)
            assert np.all(J_new >= J - 1e-12) and np.all(J_new <= ref + 1e-12)
            J = J_new


def test_vi_iteration_count_ordering_fixed_order():
    for seed in range(10):
        mdp = random_mdp(seed, 20, nonnegative=True)
        ref = compute_reference(mdp)
        iters = [value_iteration(mdp, SolverConfig(batch_size=m, shuffle=False),
                                 reference=ref).trace.iterations[-1]
                 for m in (1, 5, 10, 20)]
        assert iters == sorted(iters), iters


def test_vi_seed_determinism():
    mdp = build_taxi()
    cfg = SolverConfig(batch_size=64, seed=11)
    a = value_iteration(mdp, cfg)
    b = value_iteration(mdp, SolverConfig(batch_size=64, seed=11, workers=4))
    assert np.array_equal(a.value, b.value)
    assert np.array_equal(a.policy, b.policy)
    assert a.trace.residuals[1:] == b.trace.residuals[1:]


def test_vi_rejects_invalid_mdp():
    bad = Mdp.from_actions(0.5, [[ActionEntry(1.0, ((0, 0.5),))]])
    with pytest.raises(InvalidMdpError):
        value_iteration(bad)


def test_vi_non_finite_is_reported():
    huge = Mdp.from_actions(0.99, [[ActionEntry(1e308, ((0, 1.0),))]])
    with pytest.raises(NonFiniteValueError):
        value_iteration(huge, SolverConfig(shuffle=False))


def test_vi_max_iterations_not_converged():
    sol = value_iteration(single_state(discount=0.99), SolverConfig(max_iterations=5))
    assert not sol.converged and sol.trace.iterations[-1] == 5


def test_solver_config_validation():
    for kwargs in ({"batch_size": 0}, {"tolerance": 0.0}, {"max_iterations": 0},
                   {"workers": 0}, {"seed": -1}):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)
    with pytest.raises(ValueError):
        value_iteration(single_state(), SolverConfig(batch_size=2))


def test_exact_evaluation_examples():
    assert exact_policy_evaluation(single_state(), [0]).tolist() == [2.0]
    assert exact_policy_evaluation(two_state_chain(), [0, 0]).tolist() == [0.0, 1.0]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20))
def test_exact_evaluation_vs_iteration(seed, n):
    mdp = random_mdp(seed, n)
    mu = np.random.default_rng(seed).integers(0, mdp.action_counts)
    J = np.zeros(n)
    s = BatchSchedule.identity(n, 1)
    for _ in range(10_000):
        J = apply_minibatch_policy(mdp, J, mu, s)
    assert sup_norm_diff(exact_policy_evaluation(mdp, mu), J) <= 1e-6


def test_exact_evaluation_iterative_fallback(monkeypatch):
    import mbdp.solvers as solvers
    mdp = random_mdp(5, 30)
    mu = np.zeros(30, dtype=np.int64)
    direct = exact_policy_evaluation(mdp, mu)
    monkeypatch.setattr(solvers, "DIRECT_SOLVE_MAX", 10)
    iterative = solvers.exact_policy_evaluation(mdp, mu)
    assert sup_norm_diff(direct, iterative) <= 1e-8


def test_policy_iteration_single_state():
    sol = policy_iteration(single_state(discount=0.95))
    assert sol.converged and sol.trace.iterations[-1] == 1
    assert sol.value[0] == pytest.approx(20.0, abs=1e-12)


def test_policy_iteration_frozenlake_fixed_point_any_schedule():
    mdp = build_frozenlake()
    J_star = policy_iteration(mdp).value
    rng = np.random.default_rng(0)
    from mbdp.operators import apply_minibatch
    for m in (1, 5, 32, 64):
        s = BatchSchedule.shuffled(64, m, rng)
        assert sup_norm_diff(apply_minibatch(mdp, J_star, s), J_star) <= 1e-8


def test_policy_iteration_taxi_matches_vi():
    mdp = build_taxi()
    J_star = policy_iteration(mdp).value
    vi = value_iteration(mdp, SolverConfig(batch_size=1, tolerance=1e-6))
    assert sup_norm_diff(J_star, vi.value) <= 1e-5


def test_compute_reference_examples():
    assert compute_reference(single_state(discount=0.95))[0] == pytest.approx(20.0, abs=1e-12)
    assert compute_reference(two_state_chain()).tolist() == [0.0, 1.0]
    mdp = build_frozenlake()
    assert bellman_residual(mdp, compute_reference(mdp)) <= 1e-8


def test_mpi_single_state_matches_vi():
    mdp = single_state(discount=0.9)
    cfg = SolverConfig(tolerance=1e-8, shuffle=False)
    vi = value_iteration(mdp, cfg)
    mpi = modified_policy_iteration(mdp, 1, cfg)
    assert mpi.trace.iterations == vi.trace.iterations
    assert mpi.trace.errors[1:] == vi.trace.errors[1:] or all(
        math.isnan(x) for x in mpi.trace.errors)
    assert mpi.trace.residuals[1:] == vi.trace.residuals[1:]
    assert np.array_equal(mpi.value, vi.value)


@pytest.mark.parametrize("seed", range(8))
def test_mpi_policy_matches_pi(seed):
    mdp = random_mdp(seed, 12)
    pi = policy_iteration(mdp)
    for m, shuffle in ((1, False), (5, True), (12, True)):
        sol = modified_policy_iteration(
            mdp, 5, SolverConfig(batch_size=m, shuffle=shuffle, seed=seed, tolerance=1e-9),
            reference=pi.value)
        assert sol.converged
        assert np.all(q_gap(mdp, pi.value, sol.policy) <= 1e-9)


@pytest.mark.parametrize("name", ["frozenlake", "taxi", "maze"])
def test_mpi_policy_stabilizes_on_bundled_environments(name):
    from mbdp.envs import build
    mdp = build(name, side=30, seed=4)
    ref = compute_reference(mdp)
    sol = modified_policy_iteration(mdp, 50, SolverConfig(batch_size=min(128, mdp.n_states)),
                                    reference=ref)
    assert sol.converged
    assert sol.trace.iterations[-1] < 1000
    assert np.all(q_gap(mdp, ref, sol.policy) <= 1e-9)


def test_mpi_taxi_policy_equals_pi():
    mdp = build_taxi()
    pi = policy_iteration(mdp)
    sol = modified_policy_iteration(mdp, 50, SolverConfig(batch_size=256, tolerance=1e-9),
                                    reference=pi.value)
    assert np.array_equal(sol.policy, pi.policy) or np.all(
        q_gap(mdp, pi.value, sol.policy) <= 1e-9)


def test_mpi_requires_positive_K():
    with pytest.raises(ValueError):
        modified_policy_iteration(single_state(), 0)
