"""Solve the door fixture exactly and replay the optimal episode.

Agent 0 must reach token 0 behind door A. Agent 1 has nothing to do, so the
optimal team plan sends it to hold button a.

    python demos/door_helper.py
"""

from dfacoop import solvers
from dfacoop.fixtures import get_fixture
from dfacoop.product import rollout

MOVES = "UDLR."

f = get_fixture("door_helper")
game = solvers.enumerate_product(f.layout, f.tasks, gamma=0.999)
table = solvers.value_iteration(game)
print(f"{game.n_states} product states, optimum {solvers.greedy_success(game, table)}")

r = rollout(f.layout, f.tasks, solvers.GreedyPolicy(game, table), gamma=0.999)
for rec in r.trace[1:]:
    moves = "".join(MOVES[a] for a in rec["joint_action"])
    print(f"t={rec['step']:>2} moves {moves} positions {rec['positions']} shaped {rec['shaped_rewards']}")
print(f"success={r.success} after {r.steps} steps")
