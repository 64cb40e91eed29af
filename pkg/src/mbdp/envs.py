"""Benchmark environments as :class:`~mbdp.mdp.Mdp` values.

FrozenLake (8x8, slippery) and Taxi follow the layouts of the classic
gym versions with stage costs instead of rewards. The 2D maze is a seeded
random grid. :func:`random_mdp` produces small dense-ish instances for
property tests.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from mbdp.mdp import ActionEntry, Mdp

DEFAULT_DISCOUNT = 0.95

FROZENLAKE_8X8 = (
    "SFFFFFFF",
    "FFFFFFFF",
    "FFFHFFFF",
    "FFFFFHFF",
    "FFFHFFFF",
    "FHHFFFHF",
    "FHFFHFHF",
    "FFFHFFFG",
)
HOLE_COST = 1000.0

# left, down, right, up
_LAKE_MOVES = ((0, -1), (1, 0), (0, 1), (-1, 0))


def _merge(outcomes) -> tuple[tuple[int, float], ...]:
    """Sum probabilities of repeated targets, dropping zero-mass outcomes."""
    acc: dict[int, float] = {}
    for j, p in outcomes:
        if p > 0:
            acc[j] = acc.get(j, 0.0) + p
    return tuple(sorted(acc.items()))


def build_frozenlake(discount: float = DEFAULT_DISCOUNT, layout=FROZENLAKE_8X8) -> Mdp:
    """Slippery FrozenLake: each move goes in the intended direction or one of
    its two perpendiculars with probability 1/3 each; walking off the grid
    leaves the agent in place. Holes cost 1000 per stage and trap the agent;
    the goal is a zero-cost trap; every other tile costs 1."""
    rows, cols = len(layout), len(layout[0])
    actions = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            tile = layout[r][c]
            if tile in "HG":
                cost = HOLE_COST if tile == "H" else 0.0
                actions.append([ActionEntry(cost, ((s, 1.0),)) for _ in range(4)])
                continue
            entries = []
            for a in range(4):
                outcomes = []
                for b in ((a - 1) % 4, a, (a + 1) % 4):
                    dr, dc = _LAKE_MOVES[b]
                    nr = min(max(r + dr, 0), rows - 1)
                    nc = min(max(c + dc, 0), cols - 1)
                    outcomes.append((nr * cols + nc, 1.0 / 3.0))
                entries.append(ActionEntry(1.0, _merge(outcomes)))
            actions.append(entries)
    return Mdp.from_actions(discount, actions)


def frozenlake_tiles(layout=FROZENLAKE_8X8) -> dict[str, list[int]]:
    """0-based state indices of holes and goal."""
    flat = "".join(layout)
    return {
        "holes": [i for i, t in enumerate(flat) if t == "H"],
        "goal": [i for i, t in enumerate(flat) if t == "G"],
    }


TAXI_MAP = (
    "+---------+",
    "|R: | : :G|",
    "| : | : : |",
    "| : : : : |",
    "| | : | : |",
    "|Y| : |B: |",
    "+---------+",
)
TAXI_LOCS = ((0, 0), (0, 4), (4, 0), (4, 3))
IN_TAXI = 4
DROPOFF_COST = -20.0
ILLEGAL_COST = 10.0


def taxi_encode(row: int, col: int, passenger: int, destination: int) -> int:
    return ((row * 5 + col) * 5 + passenger) * 4 + destination


def taxi_decode(s: int) -> tuple[int, int, int, int]:
    s, destination = divmod(s, 4)
    s, passenger = divmod(s, 5)
    row, col = divmod(s, 5)
    return row, col, passenger, destination


def build_taxi(discount: float = DEFAULT_DISCOUNT) -> Mdp:
    """Taxi on the 5x5 walled map; actions south, north, east, west, pick-up, drop-off.

    Delivering the passenger costs -20 and leads to the state where the
    passenger sits at its destination. Those 100 states are otherwise
    unreachable and are made zero-cost absorbing, which encodes the end of
    the episode. Illegal pick-up/drop-off costs 10 and changes nothing;
    everything else costs 1. Dropping the passenger at a landmark other than
    the destination is legal and leaves them waiting there.
    """
    actions = []
    for s in range(500):
        row, col, passenger, dest = taxi_decode(s)
        if passenger == dest:
            actions.append([ActionEntry(0.0, ((s, 1.0),)) for _ in range(6)])
            continue
        entries = []
        for a in range(6):
            r, c, p = row, col, passenger
            cost = 1.0
            if a == 0:
                r = min(row + 1, 4)
            elif a == 1:
                r = max(row - 1, 0)
            elif a == 2 and TAXI_MAP[1 + row][2 * col + 2] == ":":
                c = col + 1
            elif a == 3 and TAXI_MAP[1 + row][2 * col] == ":":
                c = col - 1
            elif a == 4:
                if passenger < IN_TAXI and (row, col) == TAXI_LOCS[passenger]:
                    p = IN_TAXI
                else:
                    cost = ILLEGAL_COST
            elif a == 5:
                if passenger == IN_TAXI and (row, col) == TAXI_LOCS[dest]:
                    p = dest
                    cost = DROPOFF_COST
                elif passenger == IN_TAXI and (row, col) in TAXI_LOCS:
                    p = TAXI_LOCS.index((row, col))
                else:
                    cost = ILLEGAL_COST
            entries.append(ActionEntry(cost, ((taxi_encode(r, c, p, dest), 1.0),)))
        actions.append(entries)
    return Mdp.from_actions(discount, actions)


def taxi_terminal_states() -> list[int]:
    return [s for s in range(500) if taxi_decode(s)[2] == taxi_decode(s)[3]]


@dataclass(frozen=True)
class MazeParams:
    """``side`` x ``side`` grid; ``slip_mass`` is the probability of the intended move.

    Cells are walls independently with probability ``wall_density``; free
    cells not connected to the terminal are then walled off.
    """

    side: int
    seed: int = 0
    slip_mass: float = 0.7
    wall_density: float = 0.03

    def __post_init__(self):
        if self.side < 3:
            raise ValueError("maze side must be >= 3")
        if not 0.0 < self.slip_mass <= 1.0:
            raise ValueError("slip_mass must be in (0, 1]")
        if not 0.0 <= self.wall_density < 1.0:
            raise ValueError("wall_density must be in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


# up, right, down, left
_MAZE_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


def maze_grid(params: MazeParams) -> np.ndarray:
    """Boolean ``side x side`` array, True for free cells; terminal at bottom-right."""
    N = params.side
    rng = np.random.default_rng(params.seed)
    free = rng.random((N, N)) >= params.wall_density
    free[N - 1, N - 1] = True

    reached = np.zeros_like(free)
    reached[N - 1, N - 1] = True
    queue = deque([(N - 1, N - 1)])
    while queue:
        r, c = queue.popleft()
        for dr, dc in _MAZE_MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < N and 0 <= nc < N and free[nr, nc] and not reached[nr, nc]:
                reached[nr, nc] = True
                queue.append((nr, nc))
    return reached


def build_maze(params: MazeParams, discount: float = DEFAULT_DISCOUNT) -> Mdp:
    """Stochastic maze navigation with unit costs and a zero-cost terminal.

    From a free cell, the possible outcomes are the free 4-neighbours and
    staying put. The intended outcome (the neighbour in the chosen direction,
    or staying put if that is blocked) gets ``slip_mass``; the rest is spread
    evenly over the other outcomes. States are free cells in row-major order;
    the terminal is the last state.
    """
    grid = maze_grid(params)
    N = params.side
    index = -np.ones((N, N), dtype=np.int64)
    cells = np.argwhere(grid)
    index[grid] = np.arange(len(cells))
    terminal = int(index[N - 1, N - 1])

    actions = []
    for s, (r, c) in enumerate(cells.tolist()):
        if s == terminal:
            actions.append([ActionEntry(0.0, ((s, 1.0),)) for _ in range(4)])
            continue
        neighbours = []
        for dr, dc in _MAZE_MOVES:
            nr, nc = r + dr, c + dc
            ok = 0 <= nr < N and 0 <= nc < N and grid[nr, nc]
            neighbours.append(int(index[nr, nc]) if ok else None)
        outcomes = sorted({j for j in neighbours if j is not None} | {s})
        entries = []
        for a in range(4):
            intended = s if neighbours[a] is None else neighbours[a]
            if len(outcomes) == 1:
                trans = ((s, 1.0),)
            else:
                rest = (1.0 - params.slip_mass) / (len(outcomes) - 1)
                trans = _merge((j, params.slip_mass if j == intended else rest)
                               for j in outcomes)
            entries.append(ActionEntry(1.0, trans))
        actions.append(entries)
    return Mdp.from_actions(discount, actions)


def maze_terminal(mdp: Mdp) -> int:
    return mdp.n_states - 1


def random_mdp(seed: int, n_states: int, max_actions: int = 4, *,
               discount: float | None = None, max_successors: int = 4,
               nonnegative: bool = False) -> Mdp:
    """Random sparse MDP for testing.

    Each state gets 1..``max_actions`` actions; each action reaches
    1..``max_successors`` distinct states with Dirichlet probabilities.
    Costs are uniform in [0, 1) when ``nonnegative`` else in [-1, 1).
    """
    rng = np.random.default_rng(seed)
    if discount is None:
        discount = float(rng.uniform(0.5, 0.99))
    actions = []
    for _ in range(n_states):
        entries = []
        for _ in range(int(rng.integers(1, max_actions + 1))):
            k = int(rng.integers(1, min(max_successors, n_states) + 1))
            targets = rng.choice(n_states, size=k, replace=False)
            probs = rng.dirichlet(np.ones(k))
            probs[-1] = 1.0 - probs[:-1].sum()
            cost = rng.uniform(0.0, 1.0) if nonnegative else rng.uniform(-1.0, 1.0)
            entries.append(ActionEntry(cost, tuple(zip(targets.tolist(), probs.tolist()))))
        actions.append(entries)
    return Mdp.from_actions(discount, actions)


ENVIRONMENTS = ("frozenlake", "taxi", "maze")


def build(name: str, *, side: int = 80, seed: int = 0, slip_mass: float = 0.7,
          discount: float = DEFAULT_DISCOUNT) -> Mdp:
    """Build a named environment (``frozenlake``, ``taxi`` or ``maze``)."""
    if name == "frozenlake":
        return build_frozenlake(discount)
    if name == "taxi":
        return build_taxi(discount)
    if name == "maze":
        return build_maze(MazeParams(side=side, seed=seed, slip_mass=slip_mass), discount)
    raise ValueError(f"unknown environment {name!r}; expected one of {ENVIRONMENTS}")
