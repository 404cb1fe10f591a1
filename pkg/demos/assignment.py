"""Swap tasks between agents when the layout favours it.

Each agent starts in a room that holds the other agent's token. Only the
swapped assignment can finish in time.

    python demos/assignment.py
"""

from dfacoop.assignment import ExactValue, assign_optimal, exact_assignment_success
from dfacoop.fixtures import get_fixture

f = get_fixture("rooms_asym")
print(f.layout.to_ascii())
a = assign_optimal(f.layout, f.tasks, ExactValue(0.999))
for rec in a.records():
    perm = tuple(rec["permutation"])
    mark = "*" if rec["chosen"] else " "
    print(f"{mark} {perm} value {rec['proxy_value']:.3f} success {exact_assignment_success(f.layout, f.tasks, perm)}")
