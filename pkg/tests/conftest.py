import numpy as np
import pytest

from mbdp.mdp import ActionEntry, Mdp

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# Independent oracles. They walk the per-state action lists with plain
# Python and dicts, sharing no code with the kernels.

def _q(entry, alpha, value_of):
    return entry.cost + alpha * sum(p * value_of(j) for j, p in entry.transitions)


def naive_bellman(mdp: Mdp, J):
    acts = mdp.to_actions()
    a = mdp.discount
    return np.array([min(_q(e, a, lambda j: J[j]) for e in acts[i]) for i in range(mdp.n_states)])


def naive_gauss_seidel(mdp: Mdp, J):
    acts = mdp.to_actions()
    a = mdp.discount
    out = list(map(float, J))
    for i in range(mdp.n_states):
        out[i] = min(_q(e, a, lambda j: out[j]) for e in acts[i])
    return np.array(out)


def naive_minibatch(mdp: Mdp, J, perm, m, policy=None):
    """Direct transcription of the updated-set definition: the state at
    (0-based) position p sees fresh values for positions < m * floor(p / m)."""
    acts = mdp.to_actions()
    a = mdp.discount
    fresh: dict[int, float] = {}
    pos = {int(s): p for p, s in enumerate(perm)}
    for p, i in enumerate(perm):
        i = int(i)
        cutoff = m * (p // m)

        def val(j):
            return fresh[j] if pos[j] < cutoff else J[j]

        entries = acts[i] if policy is None else [acts[i][policy[i]]]
        fresh[i] = min(_q(e, a, val) for e in entries)
    return np.array([fresh[i] for i in range(mdp.n_states)])


def single_state(cost=1.0, discount=0.5) -> Mdp:
    return Mdp.from_actions(discount, [[ActionEntry(cost, ((0, 1.0),))]])


def two_state_chain(discount=0.5) -> Mdp:
    """State 1: cost 0 self-loop. State 2: cost 1, moves to state 1."""
    return Mdp.from_actions(discount, [
        [ActionEntry(0.0, ((0, 1.0),))],
        [ActionEntry(1.0, ((0, 1.0),))],
    ])


@pytest.fixture
def chain():
    return two_state_chain()
