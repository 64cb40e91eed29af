"""JSON serialization for MDPs, value functions and policies.

All indices in files are 1-based. Floats go through ``json`` which writes
the shortest repr that round-trips exactly.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from mbdp.mdp import Mdp


class FormatError(ValueError):
    """Raised when a JSON document does not follow the expected schema."""


def mdp_to_dict(mdp: Mdp) -> dict:
    states = []
    for i in range(mdp.n_states):
        actions = []
        for a in range(mdp.state_ptr[i], mdp.state_ptr[i + 1]):
            lo, hi = mdp.row_ptr[a], mdp.row_ptr[a + 1]
            actions.append(
                {
                    "cost": float(mdp.costs[a]),
                    "transitions": [
                        [int(j) + 1, float(p)]
                        for j, p in zip(mdp.targets[lo:hi], mdp.probs[lo:hi])
                    ],
                }
            )
        states.append({"actions": actions})
    return {"n_states": mdp.n_states, "discount": mdp.discount, "states": states}


def mdp_from_dict(doc: dict) -> Mdp:
    try:
        n = doc["n_states"]
        discount = doc["discount"]
        states = doc["states"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"missing MDP field: {exc}") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FormatError("n_states must be a positive integer")
    if not isinstance(states, list) or len(states) != n:
        raise FormatError(f"'states' must be a list of {n} entries")

    state_ptr = [0]
    costs: list[float] = []
    row_ptr = [0]
    targets: list[int] = []
    probs: list[float] = []
    try:
        for state in states:
            for action in state["actions"]:
                costs.append(float(action["cost"]))
                for j, p in action["transitions"]:
                    if not isinstance(j, int) or isinstance(j, bool):
                        raise FormatError(f"transition target {j!r} is not an integer")
                    targets.append(j - 1)
                    probs.append(float(p))
                row_ptr.append(len(targets))
            state_ptr.append(len(costs))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed state/action entry: {exc}") from None
    return Mdp(float(discount), state_ptr, costs, row_ptr, targets, probs)


def _write_json(doc: dict, path) -> None:
    text = json.dumps(doc, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_mdp(mdp: Mdp, path) -> None:
    _write_json(mdp_to_dict(mdp), path)


def load_mdp(path) -> Mdp:
    """Read an MDP file. Raises ``json.JSONDecodeError`` or :class:`FormatError`."""
    return mdp_from_dict(_read_json(path))


def save_values(J, path) -> None:
    values = [float(v) for v in np.asarray(J, dtype=np.float64)]
    if not all(math.isfinite(v) for v in values):
        raise ValueError("value function has non-finite entries")
    _write_json({"values": values}, path)


def load_values(path) -> np.ndarray:
    doc = _read_json(path)
    try:
        return np.asarray(doc["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad value file: {exc}") from None


def save_policy(policy, path) -> None:
    _write_json({"choices": [int(u) + 1 for u in np.asarray(policy)]}, path)


def load_policy(path) -> np.ndarray:
    doc = _read_json(path)
    try:
        return np.asarray(doc["choices"], dtype=np.int64) - 1
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad policy file: {exc}") from None
