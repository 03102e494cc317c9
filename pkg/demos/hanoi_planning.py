# Learning the Tower of Hanoi, then planning with it.
#
# Three balls on three towers of capacity 1, 2 and 3.  The curriculum shows
# each arrangement and each legal move; structure learning has to work out
# that there are 60 arrangements and six kinds of move (plus standing still).

import collections

import numpy as np

from activegrowth import agent
from activegrowth import environments as env
from activegrowth.experiments import _rng, hanoi_goal_runs, hanoi_trials, learn_hanoi

res = learn_hanoi()
kinds = collections.Counter(r[1] for r in res.trace)
print("states:", res.model.n_states, "paths:", res.model.n_paths)
print("growth steps taken:", dict(kinds))
print("arrangements reachable by search:", len(env.enumerate_arrangements()))

# A short babble.  Path 0 (do nothing) teaches nothing new, so novelty
# steers the agent towards the moves it has seen least.
model = res.model
model.factors[0].controllable = True
model, babble = agent.run_babbling(model, env.HanoiWorld(), 64, 1, seed=int(_rng(0, 1).integers(2**31)))
counts = collections.Counter(a[0] for a in babble.column("action"))
print("moves chosen in the first 64 steps:", [counts[u] for u in range(7)])
print(f"legal fraction: {np.mean(babble.column('legal')):.2f}")

# Deeper planning solves harder problems.
reduced = agent.reduce_for_planning(model)
trials = hanoi_trials(30, 5, _rng(0, 2))
for depth in (1, 3, 5):
    g = hanoi_goal_runs(reduced, trials, depth, 8, 1.0, 4.0)
    print(f"depth {depth}: success {g.success_rate:.2f} by moves needed {g.by_difficulty()}")
