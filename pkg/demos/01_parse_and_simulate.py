"""Parse a bundled game and walk its semantics step by step.

The engine is an exact interpreter: legal moves, successor states,
terminal flags and goal values all come from a stratified bottom-up
fixed-point evaluation under the closed-world assumption.
"""

import random

from ggpbench import (
    goal_values,
    initial_state,
    is_terminal,
    legal_moves,
    load_game,
    next_state,
    render,
)
from ggpbench.engine import derive

ttt = load_game("tictactoe")
print(f"roles: {ttt.roles}")
print(f"{len(ttt.rules)} rules, {len(ttt.init_facts)} init facts\n")

state = initial_state(ttt)
print("initial state:")
print(render(state), "\n")

# everything derivable from a position, not just the state itself
result = derive(ttt, state)
print(f"{len(result.derived)} facts derivable from the opening position")
print("sample legal atoms:", [render(f) for f in result.relation("legal")[:3]], "\n")

# a random but reproducible playout
rng = random.Random(42)
step = 0
while not is_terminal(ttt, state):
    legal = legal_moves(ttt, state)
    joint = {role: rng.choice(sorted(legal[role], key=render)) for role in ttt.roles}
    print(f"step {step}: " + " ".join(f"({r} {render(a)})" for r, a in joint.items()))
    state = next_state(ttt, state, joint)
    step += 1

print("\nfinal position:")
print(render(state))
print("goals:", goal_values(ttt, state))
