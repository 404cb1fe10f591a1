"""Sample a few tasks and watch them shrink as tokens are seen.

    python demos/progression.py
"""

from dfacoop.dfa import is_trivial_accepting, progress
from dfacoop.encoder import encode
from dfacoop.sampling import SamplerConfig, make_rng, sample_rad

cfg = SamplerConfig(max_states=5, alphabet_size=4)

for i in range(4):
    task = sample_rad(cfg, make_rng(7, i))
    word = make_rng(8, i).integers(0, 4, size=6).tolist()
    print(f"task {i}: {task.num_states} states, code {encode(task).short()}")
    rest = task
    for symbol in word:
        rest = progress(rest, [symbol])
        print(f"  saw {symbol} -> {rest.num_states} states {encode(rest).short()}")
        if rest.num_states == 1:
            print("  done" if is_trivial_accepting(rest) else "  failed")
            break
    print()
