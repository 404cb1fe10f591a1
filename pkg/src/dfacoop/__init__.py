"""Cooperative multi-agent task solving with DFA-specified tasks.

Tasks are deterministic finite automata over the tokens of a gridworld. The
package provides the automaton algebra, task samplers, the gridworld, the
joint game that progresses every agent's task as the agents move, exact and
learned tabular solvers for small instances, and test-time task assignment.
"""

__version__ = "0.1.0"

from .dfa import (
    Dfa,
    DfaVector,
    accepts,
    canonical_bytes,
    chain,
    is_plan,
    is_trivial,
    is_trivial_accepting,
    is_trivial_rejecting,
    language_equivalent,
    minimize,
    progress,
    progress_vector,
    reach,
    reach_avoid,
    run,
    step,
)
from .encoder import CanonicalEncoder, TaskCode, encode, encode_vector
from .env import GridState, Layout
from .errors import DfaCoopError
from .product import ProductState, RandomPolicy, StepOutcome, initial_state, product_step, rollout
from .sampling import (
    SamplerConfig,
    make_rng,
    sample_multi_agent,
    sample_reach,
    sample_reach_avoid,
    sample_rad,
)
from .solvers import (
    QConfig,
    brute_force_history_optimum,
    enumerate_product,
    estimate_success,
    q_learning,
    value_iteration,
)
from .assignment import Assignment, ExactValue, MonteCarloValue, assign_optimal, evaluate_assignment
