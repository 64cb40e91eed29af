import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbdp import _backend
from mbdp.envs import build_frozenlake, build_maze, MazeParams, random_mdp
from mbdp.mdp import sup_norm_diff
from mbdp.operators import BatchSchedule, apply_minibatch, apply_minibatch_policy, \
    batch_partition, updated_before
from mbdp.solvers import compute_reference, exact_policy_evaluation

from conftest import naive_bellman, naive_gauss_seidel, naive_minibatch, single_state, \
    two_state_chain

BACKENDS = _backend.available()


def groups(schedule):
    return [sorted((b + 1).tolist()) for b in batch_partition(schedule)]


def test_partition_m2():
    s = BatchSchedule.identity(5, 2)
    assert groups(s) == [[1, 2], [3, 4], [5]]
    M = updated_before(s)
    assert [sorted(x + 1 for x in M[i]) for i in range(5)] == [[], [], [1, 2], [1, 2], [1, 2, 3, 4]]


def test_partition_full_batch_is_bellman():
    s = BatchSchedule.identity(5, 5)
    assert groups(s) == [[1, 2, 3, 4, 5]]
    assert all(m == set() for m in updated_before(s))


def test_partition_unit_batch_is_gauss_seidel():
    s = BatchSchedule.identity(5, 1)
    assert groups(s) == [[1], [2], [3], [4], [5]]
    assert [updated_before(s)[i] for i in range(5)] == [set(range(i)) for i in range(5)]


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 40), data=st.data())
def test_partition_invariants(n, data):
    m = data.draw(st.integers(1, n))
    perm = np.random.default_rng(data.draw(st.integers(0, 2**32))).permutation(n)
    parts = batch_partition(BatchSchedule(perm, m))
    assert np.array_equal(np.concatenate(parts), perm)
    assert all(len(p) == m for p in parts[:-1])
    assert 1 <= len(parts[-1]) <= m
    # under the identity order the updated set is {1, ..., m * floor((i - 1) / m)}
    M = updated_before(BatchSchedule.identity(n, m))
    for i in range(n):
        assert M[i] == set(range(m * (i // m)))


@pytest.mark.parametrize("perm, m", [([0, 0, 1], 1), ([0, 1, 3], 1), ([0, 1], 3), ([0, 1], 0)])
def test_schedule_rejects_bad_input(perm, m):
    with pytest.raises(ValueError):
        BatchSchedule(np.array(perm), m)


@pytest.mark.parametrize("backend", BACKENDS)
def test_two_state_chain_examples(chain, backend):
    J = np.array([4.0, 4.0])
    assert apply_minibatch(chain, J, BatchSchedule.identity(2, 2), backend=backend).tolist() == [2.0, 3.0]
    assert apply_minibatch(chain, J, BatchSchedule.identity(2, 1), backend=backend).tolist() == [2.0, 2.0]
    mu = np.array([0, 0])
    out = apply_minibatch_policy(chain, J, mu, BatchSchedule.identity(2, 1), backend=backend)
    assert out.tolist() == [2.0, 2.0]
    assert J.tolist() == [4.0, 4.0]


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_state_policy_operator(backend):
    out = apply_minibatch_policy(single_state(), [0.0], [0], BatchSchedule.identity(1, 1),
                                 backend=backend)
    assert out.tolist() == [1.0]


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_minibatch(two_state_chain(), [0.0], BatchSchedule.identity(2, 1))
    with pytest.raises(ValueError):
        apply_minibatch(two_state_chain(), [0.0, 0.0], BatchSchedule.identity(3, 1))
    with pytest.raises(ValueError):
        apply_minibatch_policy(two_state_chain(), [0.0, 0.0], [0, 1], BatchSchedule.identity(2, 1))


@pytest.mark.parametrize("m", [1, 7, 32, 64])
def test_optimum_is_fixed_point_frozenlake(m):
    mdp = build_frozenlake()
    J_star = compute_reference(mdp)
    rng = np.random.default_rng(m)
    s = BatchSchedule.shuffled(64, m, rng)
    assert sup_norm_diff(apply_minibatch(mdp, J_star, s), J_star) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20), data=st.data())
def test_policy_value_is_fixed_point(seed, n, data):
    mdp = random_mdp(seed, n)
    rng = np.random.default_rng(seed)
    mu = rng.integers(0, mdp.action_counts)
    J_mu = exact_policy_evaluation(mdp, mu)
    s = BatchSchedule.shuffled(n, data.draw(st.integers(1, n)), rng)
    assert sup_norm_diff(apply_minibatch_policy(mdp, J_mu, mu, s), J_mu) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20), data=st.data())
def test_matches_definition_under_any_schedule(seed, n, data):
    mdp = random_mdp(seed, n)
    rng = np.random.default_rng(seed)
    J = rng.normal(size=n) * 3
    m = data.draw(st.integers(1, n))
    perm = rng.permutation(n)
    s = BatchSchedule(perm, m)
    assert np.allclose(apply_minibatch(mdp, J, s), naive_minibatch(mdp, J, perm, m),
                       rtol=0, atol=1e-12)
    mu = rng.integers(0, mdp.action_counts)
    assert np.allclose(apply_minibatch_policy(mdp, J, mu, s),
                       naive_minibatch(mdp, J, perm, m, policy=mu), rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20))
def test_special_cases(seed, n):
    mdp = random_mdp(seed, n)
    J = np.random.default_rng(seed).normal(size=n)
    assert np.allclose(apply_minibatch(mdp, J, BatchSchedule.identity(n, n)),
                       naive_bellman(mdp, J), rtol=0, atol=1e-12)
    assert np.allclose(apply_minibatch(mdp, J, BatchSchedule.identity(n, 1)),
                       naive_gauss_seidel(mdp, J), rtol=0, atol=1e-12)


@pytest.mark.parametrize("m", [1, 63, 64, 512, 1553])
def test_worker_count_and_backend_do_not_change_bits(m):
    mdp = build_maze(MazeParams(side=40, seed=1))
    rng = np.random.default_rng(0)
    J = rng.normal(size=mdp.n_states)
    s = BatchSchedule.shuffled(mdp.n_states, min(m, mdp.n_states), rng)
    mu = rng.integers(0, mdp.action_counts)
    ref = apply_minibatch(mdp, J, s, workers=1)
    ref_mu = apply_minibatch_policy(mdp, J, mu, s, workers=1)
    for backend in BACKENDS:
        for w in (1, 2, 3, 8):
            assert np.array_equal(apply_minibatch(mdp, J, s, workers=w, backend=backend), ref)
            assert np.array_equal(
                apply_minibatch_policy(mdp, J, mu, s, workers=w, backend=backend), ref_mu)


def test_python_fallback_thread_pool_path():
    # batch large enough to take the fallback's chunked path
    mdp = build_maze(MazeParams(side=80, seed=2))
    rng = np.random.default_rng(1)
    J = rng.normal(size=mdp.n_states)
    s = BatchSchedule.shuffled(mdp.n_states, mdp.n_states, rng)
    a = apply_minibatch(mdp, J, s, workers=1, backend="python")
    b = apply_minibatch(mdp, J, s, workers=4, backend="python")
    assert np.array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        apply_minibatch(single_state(), [0.0], BatchSchedule.identity(1, 1), backend="cuda")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20), r=st.floats(-10, 10), data=st.data())
def test_shift_exact_for_full_batch(seed, n, r, data):
    mdp = random_mdp(seed, n)
    rng = np.random.default_rng(seed)
    J = rng.normal(size=n)
    s = BatchSchedule(rng.permutation(n), n)
    shifted, plain = J + r, J.copy()
    for k in range(1, 6):
        shifted, plain = apply_minibatch(mdp, shifted, s), apply_minibatch(mdp, plain, s)
        assert np.allclose(shifted - plain, mdp.discount**k * r, rtol=0, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20), r=st.floats(-10, 10), data=st.data())
def test_shift_bounded_for_small_batches(seed, n, r, data):
    # states read shifted fresh values from earlier batches, so the shift
    # they see lies between the shift of those values and r itself
    mdp = random_mdp(seed, n)
    rng = np.random.default_rng(seed)
    J = rng.normal(size=n)
    m = data.draw(st.integers(1, n))
    s = BatchSchedule(rng.permutation(n), m)
    d = apply_minibatch(mdp, J + r, s) - apply_minibatch(mdp, J, s)
    a = mdp.discount
    assert np.all(np.abs(d) <= a * abs(r) + 1e-10)
    assert np.all(d * np.sign(r) >= -1e-10)
    first = batch_partition(s)[0]
    assert np.allclose(d[first], a * r, rtol=0, atol=1e-10)


def test_shift_gauss_seidel_counterexample(chain):
    # the second state reads the freshly shifted first state: 0.5 * 0.5
    s = BatchSchedule.identity(2, 1)
    d = apply_minibatch(chain, np.ones(2), s) - apply_minibatch(chain, np.zeros(2), s)
    assert d.tolist() == [0.5, 0.25]


def _chain4():
    # state 3 has cost 1; state 4 depends only on state 3
    from mbdp.mdp import ActionEntry, Mdp
    return Mdp.from_actions(0.5, [
        [ActionEntry(0.0, ((0, 1.0),))], [ActionEntry(0.0, ((1, 1.0),))],
        [ActionEntry(1.0, ((2, 1.0),))], [ActionEntry(0.0, ((2, 1.0),))],
    ])


def test_batch_ordering_needs_nested_batches():
    # with m=3 state 4 reads the fresh value of state 3; with m'=2 it does not,
    # so the smaller batch is not ahead everywhere
    mdp = _chain4()
    J = np.zeros(4)
    b3 = apply_minibatch(mdp, J, BatchSchedule.identity(4, 3))
    b2 = apply_minibatch(mdp, J, BatchSchedule.identity(4, 2))
    assert b3[3] == 0.5 and b2[3] == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20), data=st.data())
def test_batch_ordering_for_nested_batches(seed, n, data):
    # when m' divides m every batch of m is a union of batches of m'
    mdp = random_mdp(seed, n, nonnegative=True)
    rng = np.random.default_rng(seed)
    divisors_chain = [1]
    while divisors_chain[-1] * 2 <= n:
        divisors_chain.append(divisors_chain[-1] * data.draw(st.integers(2, 3)))
    sizes = [m for m in divisors_chain if m <= n] + [n]
    perm = rng.permutation(n)
    J = {m: np.zeros(n) for m in sizes}
    J_star = compute_reference(mdp)
    for _ in range(50):
        J = {m: apply_minibatch(mdp, J[m], BatchSchedule(perm, m)) for m in sizes}
        for small, large in zip(sizes, sizes[1:]):
            if large % small == 0:
                assert np.all(J[large] <= J[small] + 1e-12)
        assert np.all(J[1] <= J_star + 1e-12)
