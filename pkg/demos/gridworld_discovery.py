# Growing a gridworld model from nothing.
#
# The agent starts with one latent state and one path.  It watches a
# curriculum: every row and column with the object standing still, then
# every single-step move, then each object in turn.  Whenever a bigger
# model explains an epoch better and carries more information, it grows.

import numpy as np

from activegrowth import agent
from activegrowth import environments as env
from activegrowth.experiments import (
    babble_gridworld,
    gridworld_goals,
    information_decay,
    known_locations,
    learn_gridworld,
    prepare_for_action,
)

source, res = learn_gridworld()
print("epochs seen:", len(res.trace))
print("states per factor:", res.model.n_states)
print("paths per factor:", res.model.n_paths)

# The first growth steps: which candidate won, and when.
for row in res.trace[:12]:
    print(f"  epoch {row[0]:3d}  {row[1]:<10s} states={row[2]} paths={row[3]}")

# Motor babbling.  With no preferences the only drive is novelty, so the
# agent wanders towards the moves and places it has not yet learned.
model = prepare_for_action(res.model)
model, trace, cover, raw = babble_gridworld(model, known_locations(source), 128, 2, 1.0, seed=0)
print("locations covered per object:", cover)
head, tail = information_decay(trace)
print(f"expected information gain: first 50 steps {head:.3f}, last 10% {tail:.4f}")

# Now give each object a preferred location worth 4 nats and watch it go there.
goal, stays = gridworld_goals(model, 6, 1, 16, 4.0, seed=0)
print("reached target:", goal.success, "and stayed:", stays)

# The policy precision rises once the agent knows what it wants.
prec = np.array(goal.trace.column("policy_precision"))
print(f"policy precision: first step {prec[0]:.3f}, last step {prec[-1]:.3f}")
print("trace columns:", agent.TRACE_COLUMNS)
print("grid is", env.GRID, "x", env.GRID)
