"""Generative processes: sprite gridworld, Tower of Hanoi and curricula.

Outcomes are returned as lists of probability vectors, one per modality, so
they can be fed straight to inference and learning.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from .model import Factor, GenerativeModel, Modality

# ---------------------------------------------------------------------------
# curricula
# ---------------------------------------------------------------------------


def _predict(model, states):
    """Outcome probabilities for one joint state distribution."""
    out = []
    for mod in model.modalities:
        A = mod.likelihood / mod.likelihood.sum(axis=0, keepdims=True)
        for p in reversed(model.parent_indices(mod)):
            A = np.tensordot(A, states[p], axes=([A.ndim - 1], [0]))
        out.append(A)
    return out


def _reorder_parents(model):
    for mod in model.modalities:
        if model.parent_indices(mod) != sorted(model.parent_indices(mod)):
            raise ValueError("curriculum generation expects parents in factor order")


def _curriculum_states(source, epoch_len):
    """Per epoch, the sequence of per-factor state indices shown."""
    _reorder_parents(source)
    epochs = []
    for f, fac in enumerate(source.factors):
        B = fac.transition / fac.transition.sum(axis=0, keepdims=True)
        base = [0] * len(source.factors)
        for i in range(fac.n_states):
            s = list(base)
            s[f] = i
            epochs.append([tuple(s)] * epoch_len)
        for i in range(fac.n_states):
            for u in range(1, fac.n_paths):
                s = list(base)
                x = np.eye(fac.n_states)[i]
                ep = []
                for _ in range(epoch_len):
                    s[f] = int(np.argmax(x))
                    ep.append(tuple(s))
                    x = B[:, :, u] @ x
                epochs.append(ep)
    return epochs


def generate_curriculum(source, epoch_len=2):
    """Ordered epochs that let structure learning rebuild ``source``.

    For each factor in turn (every other factor held at its first state):
    every state is shown under the stationary path, then every
    non-stationary path is shown from every state.  Transitions are assumed
    deterministic.
    """
    out = []
    for ep in _curriculum_states(source, epoch_len):
        out.append([_predict(source, [np.eye(n)[i] for n, i in zip(source.n_states, s)]) for s in ep])
    return out


def curriculum_states(source, epoch_len=2):
    """Set of joint source states that :func:`generate_curriculum` shows."""
    return {s for ep in _curriculum_states(source, epoch_len) for s in ep}


# ---------------------------------------------------------------------------
# sprite gridworld
# ---------------------------------------------------------------------------

GRID = 9
SPRITES = np.array(
    [
        [[0, 1, 0], [1, 1, 1], [0, 1, 0]],  # plus
        [[1, 0, 1], [0, 1, 0], [1, 0, 1]],  # cross
        [[1, 1, 1], [1, 0, 1], [1, 1, 1]],  # hollow square
    ]
)
REWARD_TARGETS = ((4, 4), (2, 6), (6, 2))
REWARD_WIDTH = 1.0
# path index -> displacement along the factor's axis
MOVES = (0, -1, 1)
ACTIONS = {"stay": (0, 0), "up": (1, 0), "down": (2, 0), "left": (0, 1), "right": (0, 2)}


def torus_distance(a, b, size=GRID):
    d = abs(a - b) % size
    return min(d, size - d)


def render(obj, row, col):
    """Pixel-on probabilities for a sprite centred at ``(row, col)``."""
    img = np.zeros((GRID, GRID))
    for dr in range(3):
        for dc in range(3):
            if SPRITES[obj][dr, dc]:
                img[(row + dr - 1) % GRID, (col + dc - 1) % GRID] = 1.0
    return img


def reward_probability(obj, row, col):
    tr, tc = REWARD_TARGETS[obj]
    d2 = torus_distance(row, tr) ** 2 + torus_distance(col, tc) ** 2
    return float(np.exp(-d2 / (2 * REWARD_WIDTH**2)))


def grid_observation(obj, row, col):
    img = render(obj, row, col).ravel()
    obs = [np.array([1.0 - p, p]) for p in img]
    r = reward_probability(obj, row, col)
    obs.append(np.array([1.0 - r, r]))
    return obs


class GridWorld:
    """One of three sprites moving on a 9x9 torus.

    Actions are pairs ``(vertical path, horizontal path)`` with path 0 =
    stay, 1 = up/left, 2 = down/right; the names in :data:`ACTIONS` are
    accepted too.
    """

    n_modalities = GRID * GRID + 1

    def __init__(self, obj=0, row=0, col=0):
        self.obj = obj
        self.row = row
        self.col = col

    @property
    def position(self):
        return self.row, self.col

    def observe(self):
        return grid_observation(self.obj, self.row, self.col)

    @property
    def location(self):
        return self.obj, self.row, self.col

    def step(self, action):
        if isinstance(action, str):
            action = ACTIONS[action]
        v, h = action
        self.row = (self.row + MOVES[v]) % GRID
        self.col = (self.col + MOVES[h]) % GRID
        return self.observe()

    def act(self, action):
        """Apply one path per controllable factor; every move is legal."""
        return self.step(tuple(action)), True


def gridworld_preferences(model, nats=4.0):
    """Log preferences favouring the reward outcome by ``nats``."""
    return {mod.id: (np.array([0.0, nats]) if mod.id == "reward" else None) for mod in model.modalities}


def gridworld_step(world, action):
    return world.step(action)


def gridworld_source_model():
    """The true gridworld process as a generative model.

    Factors are row (up/down paths), column (left/right paths) and object
    identity; every modality depends on all three.
    """
    def shift_factor(fid):
        b = np.zeros((GRID, GRID, 3))
        for u, mv in enumerate(MOVES):
            for i in range(GRID):
                b[(i + mv) % GRID, i, u] = 1.0
        return Factor(fid, b, np.ones(GRID), np.ones(3), controllable=True)

    obj = Factor("object", np.eye(3)[:, :, None], np.ones(3), np.ones(1))
    factors = [shift_factor("row"), shift_factor("col"), obj]
    parents = ["row", "col", "object"]
    pix = np.zeros((GRID * GRID, 2, GRID, GRID, 3))
    rew = np.zeros((2, GRID, GRID, 3))
    for r, c, k in itertools.product(range(GRID), range(GRID), range(3)):
        img = render(k, r, c).ravel()
        pix[:, 1, r, c, k] = img
        pix[:, 0, r, c, k] = 1 - img
        p = reward_probability(k, r, c)
        rew[:, r, c, k] = [1 - p, p]
    mods = [Modality(f"px{i}", pix[i], np.zeros(2), list(parents)) for i in range(GRID * GRID)]
    mods.append(Modality("reward", rew, np.zeros(2), list(parents)))
    return GenerativeModel(factors, mods)


# ---------------------------------------------------------------------------
# Tower of Hanoi
# ---------------------------------------------------------------------------

N_TOWERS = 3
N_BALLS = 3
HEIGHT = 3


class IllegalMove(Exception):
    """Raised by :func:`apply_move` for a move from an empty tower."""


def hanoi_observation(arrangement):
    """Nine location modalities with levels (empty, ball 0, ball 1, ball 2)."""
    obs = []
    for tower in arrangement:
        for h in range(HEIGHT):
            level = tower[h] + 1 if h < len(tower) else 0
            obs.append(np.eye(N_BALLS + 1)[level])
    return obs


def apply_move(arrangement, move):
    """Arrangement after moving the top ball of ``move[0]`` onto ``move[1]``."""
    src, dst = move
    if not arrangement[src]:
        raise IllegalMove(f"tower {src} is empty")
    towers = [list(t) for t in arrangement]
    ball = towers[src].pop()
    towers[dst].append(ball)
    return tuple(tuple(t) for t in towers)


def legal_moves(arrangement):
    """Non-stationary legal moves in lexicographic ``(from, to)`` order."""
    return [
        (i, j)
        for i in range(N_TOWERS)
        for j in range(N_TOWERS)
        if i != j and arrangement[i]
    ]


def enumerate_arrangements(start=((0, 1, 2), (), ())):
    """Breadth-first enumeration of arrangements reachable from ``start``."""
    seen = {start: 0}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for mv in legal_moves(x):
            y = apply_move(x, mv)
            if y not in seen:
                seen[y] = seen[x] + 1
                queue.append(y)
    return seen


def move_distance(a, b):
    return enumerate_arrangements(a)[b]


class HanoiWorld:
    """Three distinguishable balls on three towers."""

    n_modalities = N_TOWERS * HEIGHT

    def __init__(self, arrangement=((0, 1, 2), (), ())):
        self.arrangement = tuple(tuple(t) for t in arrangement)

    def observe(self):
        return hanoi_observation(self.arrangement)

    @property
    def location(self):
        return self.arrangement

    def act(self, action):
        """Apply a path index: path ``k > 0`` is the ``k``-th legal move.

        This is the labelling that curriculum learning assigns to paths.
        Paths beyond the legal moves leave the arrangement unchanged.
        """
        (k,) = action
        if k == 0:
            return self.observe(), True
        moves = legal_moves(self.arrangement)
        if k > len(moves):
            return self.observe(), False
        return self.step(moves[k - 1])

    def step(self, move):
        """Apply ``(from, to)``; returns ``(observation, legal)``.

        Illegal moves leave the arrangement unchanged.
        """
        try:
            self.arrangement = apply_move(self.arrangement, move)
            legal = True
        except IllegalMove:
            legal = False
        return self.observe(), legal


def hanoi_preferences(target, nats=1.0):
    """Log preferences for the ball seen at each location of ``target``.

    Locations the target leaves empty carry no preference.
    """
    return [nats * o * (o[0] == 0) for o in hanoi_observation(target)]


def hanoi_step(world, move):
    return world.step(move)


def hanoi_stationary_arrangements():
    """Arrangements built by placing the balls one at a time.

    For each order of the three balls and each choice of tower per ball,
    the balls are stacked in that order.  Duplicates are kept.
    """
    out = []
    for order in itertools.permutations(range(N_BALLS)):
        for towers in itertools.product(range(N_TOWERS), repeat=N_BALLS):
            stacks = [[] for _ in range(N_TOWERS)]
            for ball, tower in zip(order, towers):
                stacks[tower].append(ball)
            out.append(tuple(tuple(s) for s in stacks))
    return out


def hanoi_curriculum(epoch_len=2):
    """Stationary epochs for every constructed arrangement, then transitions.

    Transitions move the top ball of every tower to each tower in turn,
    for every distinct arrangement in order of first appearance.
    """
    built = hanoi_stationary_arrangements()
    epochs = [[hanoi_observation(x)] * epoch_len for x in built]
    distinct = list(dict.fromkeys(built))
    for x in distinct:
        for src in range(N_TOWERS):
            if not x[src]:
                continue
            for dst in range(N_TOWERS):
                seq = [x]
                for _ in range(epoch_len - 1):
                    seq.append(apply_move(seq[-1], (src, dst)) if seq[-1][src] else seq[-1])
                epochs.append([hanoi_observation(y) for y in seq])
    return epochs
