"""Perception, action and learning loops.

The agent holds beliefs over the joint state space of its model.  Each step
it plans, acts, predicts the next state under the chosen paths, updates its
beliefs with the new observation and (optionally) learns from it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .inference import joint_log_likelihood
from .planner import PlanningModel, plan, select_action
from .structure import prune

BELIEF_FLOOR = 1e-16
TRACE_COLUMNS = (
    "step",
    "phase",
    "trial",
    "location",
    "map_states",
    "action",
    "legal",
    "F",
    "info_gain",
    "policy_precision",
    "reward",
)


@dataclass
class EpisodeTrace:
    """One row per step of a babbling or goal-directed run."""

    rows: list = field(default_factory=list)

    def append(self, **row):
        self.rows.append(row)

    def column(self, name):
        return [r[name] for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        def cell(v):
            if isinstance(v, tuple):
                return ";".join(str(x) for x in _flat(v))
            if isinstance(v, float):
                return format(v, ".10g")
            return "" if v is None else str(v)

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([cell(r.get(c)) for c in TRACE_COLUMNS])


def _flat(v):
    for x in v:
        if isinstance(x, tuple):
            yield from _flat(x)
        else:
            yield x


def joint_prior(model):
    D = np.ones(1)
    for fac in model.factors:
        D = np.kron(D, fac.initial / fac.initial.sum())
    return D


def perceive(model, prior, obs, floor=BELIEF_FLOOR):
    """Exact posterior over joint states for one observation.

    Returns ``(posterior, F)`` where ``F`` is the negative log evidence of
    the observation under the (digamma-expected) likelihood.  Posterior
    probabilities below ``floor`` are set to zero: a never-visited
    likelihood column explains any outcome very poorly, so a residue of
    numerically negligible belief would otherwise be amplified by hundreds
    of nats at the next observation.
    """
    ll = joint_log_likelihood(model, [obs])[0].ravel()
    with np.errstate(divide="ignore"):
        lp = np.log(prior) + ll
    top = lp.max()
    p = np.exp(lp - top)
    z = p.sum()
    p = p / z
    if floor:
        p = np.where(p < floor, 0.0, p)
        p = p / p.sum()
    return p, float(-(top + np.log(z)))


def _marginals(Q, ns):
    R = Q.reshape(ns)
    return [R.sum(axis=tuple(i for i in range(len(ns)) if i != f)) for f in range(len(ns))]


def learn_step(model, obs, Q_prev, Q, paths, transitions=True):
    """Accumulate likelihood and transition counts in place (ungated).

    ``paths[f]`` is the path taken by factor ``f``.
    """
    ns = model.n_states
    R = Q.reshape(ns)
    for g, mod in enumerate(model.modalities):
        pidx = model.parent_indices(mod)
        others = tuple(i for i in range(len(ns)) if i not in pidx)
        joint = R.sum(axis=others) if others else R
        order = np.argsort(np.argsort(pidx))
        joint = np.transpose(joint, order) if len(pidx) > 1 else joint
        mod.likelihood += np.multiply.outer(obs[g], joint)
    if transitions:
        prev = _marginals(Q_prev, ns)
        new = _marginals(Q, ns)
        for f, fac in enumerate(model.factors):
            u = paths[f]
            if u == 0:
                fac.transition[:, :, 0] += np.diag(prev[f])
            else:
                fac.transition[:, :, u] += np.outer(new[f], prev[f])


def _paths(pm, action):
    out = []
    for f in range(len(pm.model.factors)):
        out.append(action[pm.controllable.index(f)] if f in pm.controllable else 0)
    return out


def _reward(model, obs):
    for g, mod in enumerate(model.modalities):
        if mod.id == "reward":
            return float(obs[g][1])
    return None


def run_babbling(
    model,
    env,
    n_steps,
    depth=2,
    seed=0,
    precision=1.0,
    mode="sample",
    learn=True,
    trace=None,
    trial=0,
):
    """Explore driven by expected free energy while learning counts.

    Returns ``(model, trace)``; the input model is not modified.
    """
    model = model.copy()
    rng = np.random.default_rng(seed)
    trace = EpisodeTrace() if trace is None else trace
    obs = env.observe()
    Q, F = perceive(model, joint_prior(model), obs)
    if learn:
        learn_step(model, obs, Q, Q, [0] * len(model.factors), transitions=False)
    for step in range(n_steps):
        pm = PlanningModel(model)
        p = plan(model, Q, depth, precision, planning=pm)
        k = select_action(p, mode, rng)
        action = pm.actions[k]
        loc = env.location
        obs, legal = env.act(action)
        Q_prev = Q
        Q, F = perceive(model, pm.T[k] @ Q_prev, obs)
        if learn:
            learn_step(model, obs, Q_prev, Q, _paths(pm, action))
        trace.append(
            step=step,
            trial=trial,
            location=loc,
            map_states=tuple(int(np.argmax(m)) for m in _marginals(Q, model.n_states)),
            action=tuple(int(x) for x in action),
            legal=legal,
            F=F,
            info_gain=float(p.components[2][k]),
            policy_precision=p.policy_precision,
            reward=_reward(model, obs),
        )
    return model, trace


def coverage(trace, trial=None):
    """Distinct locations visited (including the final one) per trial."""
    rows = [r for r in trace.rows if trial is None or r["trial"] == trial]
    return len({r["location"] for r in rows})


@dataclass
class GoalResult:
    trace: EpisodeTrace
    success: list
    difficulty: list

    @property
    def success_rate(self):
        return float(np.mean(self.success)) if self.success else float("nan")

    def by_difficulty(self):
        out = {}
        for d, s in zip(self.difficulty, self.success):
            out.setdefault(int(d), []).append(bool(s))
        return {d: float(np.mean(v)) for d, v in sorted(out.items())}


def run_goal(
    model,
    trials,
    depth,
    max_moves=8,
    inner_precision=1.0,
    precision=1.0,
    mode="argmax",
    novelty=True,
    seed=0,
    stop_at_goal=True,
):
    """Goal-directed trials with learning frozen.

    ``trials`` is a list of ``(env, preferences, is_success, difficulty)``
    where ``preferences`` is a list of per-modality log preferences (or a
    dict from modality id) and ``is_success(env)`` tests the goal.  A trial
    succeeds if the goal holds at any point within ``max_moves``; with
    ``stop_at_goal=False`` the agent keeps acting until the last move.
    """
    trace = EpisodeTrace()
    success = []
    difficulty = []
    rng = np.random.default_rng(seed)
    for t, (env, prefs, done, diff) in enumerate(trials):
        m = model.copy()
        for g, mod in enumerate(m.modalities):
            pref = prefs.get(mod.id) if isinstance(prefs, dict) else prefs[g]
            mod.preference = np.zeros(mod.n_levels) if pref is None else np.asarray(pref, dtype=float)
        pm = PlanningModel(m, novelty=novelty)
        Q, F = perceive(m, joint_prior(m), env.observe())
        ok = done(env)
        for step in range(max_moves):
            if ok and stop_at_goal:
                break
            p = plan(m, Q, depth, precision, inner_precision, planning=pm)
            k = select_action(p, mode, rng)
            loc = env.location
            obs, legal = env.act(pm.actions[k])
            Q, F = perceive(m, pm.T[k] @ Q, obs)
            ok = ok or done(env)
            trace.append(
                step=step,
                trial=t,
                location=loc,
                map_states=tuple(int(np.argmax(x)) for x in _marginals(Q, m.n_states)),
                action=tuple(int(x) for x in pm.actions[k]),
                legal=legal,
                F=F,
                info_gain=float(p.components[2][k]),
                policy_precision=p.policy_precision,
                reward=_reward(m, obs),
            )
        success.append(bool(ok))
        difficulty.append(diff)
    return GoalResult(trace, success, difficulty)


def reduce_for_planning(model):
    """Copy of a trained model with untouched likelihood and transition counts removed."""
    reduced, _ = prune(model, transitions=True)
    return reduced


def classify(model, obs, state_labels, classes=None):
    """Class posterior and free energy for one observation.

    The state posterior is exact for a single-factor model; it is summed
    over the states carrying each class label.
    """
    Q, F = perceive(model, joint_prior(model), obs)
    if model.factors and len(model.factors) > 1:
        Q = _marginals(Q, model.n_states)[0]
    classes = sorted(set(state_labels)) if classes is None else list(classes)
    post = np.array([Q[[i for i, lab in enumerate(state_labels) if lab == c]].sum() for c in classes])
    return post, F
