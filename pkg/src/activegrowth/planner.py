"""Expected free energy of actions and tree search over action sequences.

Beliefs are held over the joint state space of all factors, so a joint
transition matrix per action propagates them exactly.  The expected free
energy of reaching predicted beliefs ``q(s)`` is::

    G = risk + ambiguity - novelty

with risk the KL divergence of predicted outcomes from preferred outcomes,
ambiguity the expected entropy of the predictive likelihood and novelty the
expected information gain about likelihood and transition counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .inference import COUNT_FLOOR
from .tensor import entropy, softmax

LEAF_BUDGET = 10**6
# joint transition matrices keyed on the normalised per-factor transitions
_JOINT_CACHE: dict = {}


class PlanningBudgetError(ValueError):
    """The search tree would exceed the leaf budget."""


def novelty_weight(counts):
    """Count-based information-gain weights ``(1/a - 1/a_colsum) / 2``.

    Cells with zero counts (removed by model reduction) get zero weight.
    """
    counts = np.asarray(counts, dtype=float)
    colsum = counts.sum(axis=0, keepdims=True)
    safe = np.maximum(counts, COUNT_FLOOR)
    w = 0.5 * (1.0 / safe - 1.0 / np.maximum(colsum, COUNT_FLOOR))
    return np.where(counts > 0, w, 0.0)


def _planning_transition(b, concentration):
    """Normalised transitions, with never-observed columns predicted as stationary.

    A column still holding only prior counts says nothing about where a
    path leads; spreading belief over every state would make its predicted
    outcomes look diffuse, which the risk term wrongly rewards.
    """
    b = np.maximum(np.asarray(b, dtype=float), 0)
    B = b / b.sum(axis=0, keepdims=True)
    n = b.shape[0]
    unseen = b.sum(axis=0) <= n * concentration * (1 + 1e-9)
    unseen[:, 0] = False
    if unseen.any():
        eye = np.eye(n)
        for u in range(b.shape[2]):
            B[:, unseen[:, u], u] = eye[:, unseen[:, u]]
    return B


def _full(tensor, pidx, ns):
    """Broadcast a ``[levels, *parents]`` tensor to ``[levels, N]`` over the joint space."""
    if list(pidx) == list(range(len(ns))):
        return tensor.reshape(tensor.shape[0], -1)
    order = np.argsort(pidx)
    t = np.transpose(tensor, [0] + [i + 1 for i in order])
    shape = [tensor.shape[0]] + [1] * len(ns)
    for ax, p in enumerate(np.asarray(pidx)[order]):
        shape[p + 1] = t.shape[ax + 1]
    t = np.broadcast_to(t.reshape(shape), (tensor.shape[0],) + tuple(ns))
    return t.reshape(tensor.shape[0], -1)


class PlanningModel:
    """Arrays derived from a model snapshot for fast evaluation of G.

    Parameters
    ----------
    model : GenerativeModel
    novelty : bool
        Include the information-gain terms.
    """

    def __init__(self, model, novelty=True):
        self.model = model
        self.ns = model.n_states
        self.N = int(np.prod(self.ns))
        self.novelty = novelty
        groups = {}
        self.ambiguity = np.zeros(self.N)
        for g, mod in enumerate(model.modalities):
            groups.setdefault(mod.n_levels, []).append(g)
        self.groups = []
        for L, idx in sorted(groups.items()):
            A, W, C = [], [], []
            for g in idx:
                mod = model.modalities[g]
                pidx = model.parent_indices(mod)
                a = mod.likelihood
                Abar = a / a.sum(axis=0, keepdims=True)
                H = entropy(Abar, axis=0)
                self.ambiguity += _full(H[None], pidx, self.ns)[0]
                A.append(_full(Abar, pidx, self.ns))
                W.append(_full(novelty_weight(a), pidx, self.ns) if novelty else None)
                C.append(np.log(softmax(mod.preference)))
            self.groups.append(
                (
                    np.array(idx),
                    np.stack(A),
                    np.stack(W) if novelty else None,
                    np.stack(C),
                )
            )
        self.controllable = [f for f, fac in enumerate(model.factors) if fac.controllable and fac.n_paths > 1]
        self.actions = list(itertools.product(*[range(model.factors[f].n_paths) for f in self.controllable]))
        self.B = []
        self.Wb = []
        for fac in model.factors:
            self.B.append(_planning_transition(fac.transition, model.concentration))
            self.Wb.append(novelty_weight(fac.transition) if novelty else None)
        key = tuple(B.tobytes() for B in self.B) + tuple(
            (fac.path_prior.tobytes(), f in self.controllable) for f, fac in enumerate(model.factors)
        )
        T = _JOINT_CACHE.get(key)
        if T is None:
            T = np.stack([self._joint_transition(a) for a in self.actions])
            if len(_JOINT_CACHE) >= 8:
                _JOINT_CACHE.pop(next(iter(_JOINT_CACHE)))
            _JOINT_CACHE[key] = T
        self.T = T

    def factor_paths(self, action):
        """Path (or path distribution) for every factor under a joint action."""
        paths = []
        for f, fac in enumerate(self.model.factors):
            if f in self.controllable:
                paths.append(np.eye(fac.n_paths)[action[self.controllable.index(f)]])
            else:
                paths.append(fac.path_prior / fac.path_prior.sum())
        return paths

    def _joint_transition(self, action):
        T = np.ones((1, 1))
        for B, q in zip(self.B, self.factor_paths(action)):
            T = np.kron(T, np.einsum("iju,u->ij", B, q))
        return T

    def marginals(self, Q):
        """Per-factor marginals of joint beliefs ``Q`` (``[N, K]``)."""
        K = Q.shape[1]
        R = Q.reshape(tuple(self.ns) + (K,))
        out = []
        for f in range(len(self.ns)):
            axes = tuple(i for i in range(len(self.ns)) if i != f)
            out.append(R.sum(axis=axes))
        return out

    def predict_outcomes(self, Q):
        """Predicted outcome distributions ``[G, L, K]`` per level group."""
        return [np.einsum("gln,nk->glk", A, Q) for _, A, _, _ in self.groups]

    def efe(self, Q_prev, Q, action):
        """Expected free energy of arriving at beliefs ``Q`` from ``Q_prev``.

        Returns ``(G, risk, ambiguity, novelty)`` arrays over the columns
        of ``Q``.
        """
        risk = np.zeros(Q.shape[1])
        nov = np.zeros(Q.shape[1])
        for (_, A, W, C), qo in zip(self.groups, self.predict_outcomes(Q)):
            with np.errstate(divide="ignore", invalid="ignore"):
                lq = np.where(qo > 0, np.log(np.maximum(qo, 1e-300)), 0.0)
            risk += np.einsum("glk,glk->k", qo, lq - C[:, :, None])
            if W is not None:
                nov += np.einsum("glk,glk->k", qo, np.einsum("gln,nk->glk", W, Q))
        amb = self.ambiguity @ Q
        if self.novelty:
            prev = self.marginals(Q_prev)
            new = self.marginals(Q)
            for f, q in enumerate(self.factor_paths(action)):
                Wf = np.einsum("iju,u->ij", self.Wb[f], q)
                nov += np.einsum("ik,ij,jk->k", new[f], Wf, prev[f])
        risk = np.maximum(risk, 0.0)
        return risk + amb - nov, risk, amb, nov


def efe_path(model, beliefs, action, planning=None):
    """Expected free energy of one action from joint beliefs ``beliefs`` (length N).

    ``action`` holds one path per controllable factor.
    """
    pm = planning or PlanningModel(model)
    action = tuple(action)
    if action not in pm.actions:
        raise IndexError(f"action {action} out of range")
    a = pm.actions.index(action)
    Q = np.asarray(beliefs, dtype=float).reshape(-1, 1)
    G, _, _, _ = pm.efe(Q, pm.T[a] @ Q, action)
    return float(G[0])


@dataclass
class Plan:
    """Outcome of a tree search from the current beliefs.

    ``G`` holds the accumulated expected free energy of each first action,
    ``probs = softmax(-precision * G)``; ``components`` are the one-step
    ``(risk, ambiguity, novelty)`` terms of each first action.
    """

    actions: list
    G: np.ndarray
    probs: np.ndarray
    precision: float
    components: tuple
    depth: int

    @property
    def policy_precision(self):
        """Negative entropy of the action distribution."""
        p = self.probs[self.probs > 0]
        return float(np.sum(p * np.log(p)))


def plan(model, beliefs, depth=1, precision=1.0, inner_precision=1.0, planning=None):
    """Recursive expected-free-energy evaluation to ``depth`` steps.

    The value of a node is its own G plus the softmax-weighted (precision
    ``inner_precision``) average of its children's values.
    """
    pm = planning or PlanningModel(model)
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if not pm.actions or not pm.controllable:
        raise ValueError("model has no controllable factor")
    nA = len(pm.actions)
    if nA**depth > LEAF_BUDGET:
        raise PlanningBudgetError(f"{nA}^{depth} leaves exceed the budget of {LEAF_BUDGET}")
    Q = np.asarray(beliefs, dtype=float).reshape(-1, 1)
    # nodes holding identical beliefs have identical subtrees, so each level
    # keeps only its distinct belief columns and an index back to them
    levels = []
    links = []
    first = None
    for level in range(depth):
        K = Q.shape[1]
        G = np.zeros((K, nA))
        nxt = np.zeros((pm.N, K, nA))
        for a, act in enumerate(pm.actions):
            Qa = pm.T[a] @ Q
            g, r, amb, nov = pm.efe(Q, Qa, act)
            G[:, a] = g
            nxt[:, :, a] = Qa
            if level == 0:
                first = (r, amb, nov) if first is None else tuple(
                    np.concatenate([x, y]) for x, y in zip(first, (r, amb, nov))
                )
        levels.append(G)
        if level < depth - 1:
            Q, inv = np.unique(nxt.reshape(pm.N, K * nA), axis=1, return_inverse=True)
            links.append(inv.reshape(K, nA))
    total = levels[-1]
    for G, inv in zip(reversed(levels[:-1]), reversed(links)):
        v = total[inv]
        z = -inner_precision * (v - v.min(axis=2, keepdims=True))
        w = np.exp(z)
        w /= w.sum(axis=2, keepdims=True)
        total = G + (w * v).sum(axis=2)
    G1 = total[0]
    return Plan(pm.actions, G1, softmax(-G1, precision), precision, first, depth)


def select_action(p, mode="argmax", rng=None):
    """Action index from a plan (lowest index wins ties in argmax mode)."""
    if mode == "argmax":
        return int(np.argmax(p.probs))
    if mode == "sample":
        if rng is None:
            raise ValueError("sampling needs a random generator")
        return int(rng.choice(len(p.probs), p=p.probs))
    raise ValueError(f"unknown mode {mode!r}")
