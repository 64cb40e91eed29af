"""Mini-batch dynamic programming for finite discounted MDPs."""
from mbdp._backend import BACKEND
from mbdp.mdp import (
    ActionEntry,
    InvalidMdpError,
    Mdp,
    Violation,
    check_mdp,
    greedy_policy,
    q_value,
    sup_norm_diff,
    validate_mdp,
)
from mbdp.operators import (
    BatchSchedule,
    apply_minibatch,
    apply_minibatch_policy,
    batch_partition,
)
from mbdp.solvers import (
    ConvergenceTrace,
    Solution,
    SolverConfig,
    compute_reference,
    exact_policy_evaluation,
    modified_policy_iteration,
    policy_iteration,
    value_iteration,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ActionEntry", "BatchSchedule", "ConvergenceTrace", "InvalidMdpError", "Mdp",
    "Solution", "SolverConfig", "Violation", "apply_minibatch", "apply_minibatch_policy",
    "batch_partition", "check_mdp", "compute_reference", "exact_policy_evaluation",
    "greedy_policy", "modified_policy_iteration", "policy_iteration", "q_value",
    "sup_norm_diff", "validate_mdp", "value_iteration",
]
