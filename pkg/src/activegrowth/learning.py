"""Dirichlet parameter learning with information-gain gating.

A candidate increment ``delta`` to a likelihood tensor is accepted in
proportion ``p = softmax(-alpha * [G(a), G(a + delta)])[1]`` where
``G(a) = -MI(a) - preference . P(o)`` scores the joint-normalised counts.
With a large ``alpha`` this reduces to accepting or rejecting the update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, entropy, outer, softmax


class FilteredBeliefsError(ValueError):
    """Transition learning needs smoothed beliefs."""


@dataclass
class UpdateProposal:
    """A pending likelihood update.

    ``deltas[g]`` is the increment for modality ``g`` (``None`` to leave the
    modality alone).  ``G_no`` and ``G_yes`` are summed over modalities.
    """

    deltas: list
    G_no: float
    G_yes: float
    p_update: float


def mutual_information(a):
    """Mutual information between the leading axis and the remaining axes.

    ``a`` is joint-normalised after matricising to ``[levels, states]``.
    """
    a = np.asarray(a, dtype=float)
    joint = a.reshape(a.shape[0], -1)
    total = joint.sum()
    if total <= 0:
        raise ValueError("tensor has zero total mass")
    joint = joint / total
    return float(entropy(joint.sum(axis=1)) + entropy(joint.sum(axis=0)) - entropy(joint))


def param_efe(a, preference=None):
    """Expected free energy of a likelihood tensor: ``-MI - preference . P(o)``."""
    mi = mutual_information(a)
    if preference is None:
        return -mi
    a = np.asarray(a, dtype=float)
    p_o = a.reshape(a.shape[0], -1).sum(axis=1) / a.sum()
    return -mi - float(np.dot(preference, p_o))


def gate_probability(G_no, G_yes, alpha):
    """Probability of accepting an update."""
    return float(softmax(np.array([G_no, G_yes]), precision=-alpha)[1])


def delta_counts(model, obs, states, modality):
    """Outer product of an outcome with the posteriors of its parent factors.

    Parameters
    ----------
    obs : list of ndarray
        One outcome vector per modality.
    states : list of ndarray
        One state posterior per factor (a single time step).
    """
    mod = model.modalities[modality]
    o = np.asarray(obs[modality], dtype=float)
    if o.shape != (mod.n_levels,):
        raise ShapeError(f"outcome for {mod.id} has shape {o.shape}")
    d = outer([o] + [states[p] for p in model.parent_indices(mod)])
    if d.shape != mod.likelihood.shape:
        raise ShapeError(f"delta shape {d.shape} != likelihood shape {mod.likelihood.shape}")
    return d


def epoch_deltas(model, epoch, states, modalities=None):
    """Likelihood increments accumulated over an epoch.

    ``states[f]`` is a ``[T, n_states]`` array of posteriors.
    """
    idx = range(len(model.modalities)) if modalities is None else modalities
    out = [None] * len(model.modalities)
    for g in idx:
        d = 0.0
        for t, obs in enumerate(epoch):
            d = d + delta_counts(model, obs, [s[t] for s in states], g)
        out[g] = d
    return out


def propose(model, deltas, alpha=None, use_preferences=True):
    """Score a set of likelihood increments as a single gated decision."""
    alpha = model.alpha if alpha is None else alpha
    G_no = G_yes = 0.0
    for g, d in enumerate(deltas):
        if d is None:
            continue
        mod = model.modalities[g]
        pref = mod.preference if use_preferences else None
        G_no += param_efe(mod.likelihood, pref)
        G_yes += param_efe(mod.likelihood + d, pref)
    return UpdateProposal(deltas, G_no, G_yes, gate_probability(G_no, G_yes, alpha))


def gated_update(model, proposal):
    """New snapshot with every likelihood incremented by ``p_update * delta``."""
    out = model.copy()
    for g, d in enumerate(proposal.deltas):
        if d is not None:
            out.modalities[g].likelihood = out.modalities[g].likelihood + proposal.p_update * d
    return out


def update_likelihood(model, epoch, states, gate=True, alpha=None, use_preferences=True):
    """Accumulate likelihood counts for an epoch, optionally gated.

    Returns the new model and the proposal (``p_update = 1`` when ungated).
    """
    deltas = epoch_deltas(model, epoch, states)
    if gate:
        prop = propose(model, deltas, alpha, use_preferences)
    else:
        prop = UpdateProposal(deltas, 0.0, 0.0, 1.0)
    return gated_update(model, prop), prop


def transition_deltas(model, beliefs):
    """Per-factor transition increments from smoothed beliefs.

    The stationary path only ever receives diagonal mass (the belief of
    having stayed put), so its normalised slice remains the identity.
    """
    if not getattr(beliefs, "smoothed", True):
        raise FilteredBeliefsError("transition updates need smoothed beliefs")
    out = []
    for f, fac in enumerate(model.factors):
        s = beliefs.states[f]
        q = beliefs.paths[f]
        d = np.zeros_like(fac.transition)
        for t in range(s.shape[0] - 1):
            pair = np.outer(s[t + 1], s[t])
            d[:, :, 0] += q[0] * np.diag(s[t])
            if fac.n_paths > 1:
                d[:, :, 1:] += pair[:, :, None] * q[None, None, 1:]
        out.append(d)
    return out


def update_transitions(model, beliefs):
    """New snapshot with transition counts accumulated from an epoch."""
    out = model.copy()
    for fac, d in zip(out.factors, transition_deltas(model, beliefs)):
        fac.transition = fac.transition + d
    return out
