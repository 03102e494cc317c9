"""Growing and pruning model structure.

Expansion considers, for each epoch, the current (parent) model and a few
augmented models: one more state for the last factor, one more path, or one
more two-state factor.  Every candidate explains the epoch under precise
beliefs about its latent causes and absorbs the epoch through a hypothetical
update; the candidate is kept only if it lowers the free energy of the epoch
(plus any hyperprior) and raises the mutual information of its parameters.

Reduction goes the other way: counts that were never meaningfully updated
are removed when that raises the marginal likelihood.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .inference import COUNT_FLOOR, _safe_transition, infer_epoch, joint_log_likelihood, log_likelihood_tensor
from .learning import epoch_deltas, mutual_information, param_efe, propose, gated_update
from .model import Factor, STATIONARY_COUNT, validate
from .tensor import log_beta

SELECTION_ALPHA = 1e6
# largest number of styles assumed for the style hyperprior
DEFAULT_MAX_STYLES = 128
# largest joint transition work (states^2 x path combinations x steps) for exact assignment
JOINT_MAP_BUDGET = 5 * 10**7
KINDS = ("parent", "add_state", "add_path", "add_factor")


class InfeasibleReductionError(ValueError):
    """A reduction would leave a nonpositive count."""


@dataclass
class CandidateModel:
    """A parent model or one of its expansions, with comparison scores.

    ``model`` is the structure before the epoch is absorbed and ``updated``
    the structure after the hypothetical update.  ``dG = G(parent) - G(self)``
    so a positive value means the candidate's parameters carry more mutual
    information.
    """

    kind: str
    model: object
    dF: float = 0.0
    dG: float = 0.0
    dH: float = 0.0
    accepted: bool = False
    F: float = math.nan
    G: float = math.nan
    updated: object = None
    p_update: float = math.nan


@dataclass
class StyleHyperprior:
    """Log-odds prior on discovering a new style: ``ln p - ln(1 - p)``, ``p = n / N``."""

    N: int = DEFAULT_MAX_STYLES
    n: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")

    @property
    def dH(self):
        p = self.n / self.N
        if p <= 0:
            return -math.inf
        if p >= 1:
            return math.inf
        return math.log(p) - math.log1p(-p)


def coverage_bound(confidence=0.001, N=DEFAULT_MAX_STYLES):
    """Exemplars needed before every one of N equiprobable styles is likely seen.

    The probability of never meeting a given style in ``k`` exemplars is
    ``(1 - 1/N)^k``; this returns the ``k`` at which that equals
    ``confidence``.
    """
    return math.log(confidence) / math.log1p(-1.0 / N)


# ---------------------------------------------------------------------------
# expansions
# ---------------------------------------------------------------------------


def add_state(model, factor=-1):
    """Copy of ``model`` with one more state in ``factor``."""
    m = model.copy()
    f = factor % len(m.factors)
    fac = m.factors[f]
    n, P = fac.n_states, fac.n_paths
    b = np.full((n + 1, n + 1, P), m.concentration)
    b[:n, :n, :] = fac.transition
    b[:, n, 0] = 0.0
    b[n, :n, 0] = 0.0
    b[n, n, 0] = STATIONARY_COUNT
    fac.transition = b
    fac.initial = np.append(fac.initial, 1.0)
    for mod in m.modalities:
        pidx = m.parent_indices(mod)
        if f not in pidx:
            continue
        ax = pidx.index(f) + 1
        shape = list(mod.likelihood.shape)
        shape[ax] = 1
        fresh = np.full(shape, m.concentration)
        mod.likelihood = np.concatenate([mod.likelihood, fresh], axis=ax)
    return m


def add_path(model, factor=-1):
    """Copy of ``model`` with a fresh transition slice for ``factor``."""
    m = model.copy()
    fac = m.factors[factor % len(m.factors)]
    n = fac.n_states
    fresh = np.full((n, n, 1), m.concentration)
    fac.transition = np.concatenate([fac.transition, fresh], axis=2)
    fac.path_prior = np.append(fac.path_prior, 1.0)
    fac.controllable = True
    return m


def add_factor(model, factor_id=None):
    """Copy of ``model`` with a new two-state, one-path factor.

    Every modality gains the new factor as its last parent.  Existing counts
    sit at the new factor's first state; the second state is fresh.
    """
    m = model.copy()
    if factor_id is None:
        factor_id = f"f{len(m.factors)}"
    m.factors.append(
        Factor(
            factor_id,
            np.eye(2)[:, :, None] * STATIONARY_COUNT,
            np.ones(2),
            np.ones(1),
        )
    )
    for mod in m.modalities:
        fresh = np.full(mod.likelihood.shape, m.concentration)
        mod.likelihood = np.stack([mod.likelihood, fresh], axis=-1)
        mod.parents = list(mod.parents) + [factor_id]
    return m


def expand_candidates(model, kinds=KINDS):
    """Parent plus admissible expansions, in a fixed order.

    A new state is considered only while the last factor has a single
    (stationary) path.  Paths and factors are considered once the last
    factor has at least two states.
    """
    last = model.factors[-1]
    out = [CandidateModel("parent", model)]
    if last.n_paths == 1 and "add_state" in kinds:
        out.append(CandidateModel("add_state", add_state(model)))
    if last.n_states >= 2:
        if "add_path" in kinds:
            out.append(CandidateModel("add_path", add_path(model)))
        if "add_factor" in kinds:
            out.append(CandidateModel("add_factor", add_factor(model)))
    return out


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def transition_information(factor, concentration):
    """Mutual information between next state and (previous state, path).

    Only non-stationary slices count, and only the counts the data added on
    top of the prior, so a fresh slice contributes nothing until it is used.
    """
    if factor.n_paths < 2:
        return 0.0
    n = factor.n_states
    data = np.clip(factor.transition[:, :, 1:].reshape(n, -1) - concentration, 0.0, None)
    if data.sum() <= 1e-12:
        return 0.0
    return mutual_information(data)


def model_efe(model, use_preferences=True):
    """Expected free energy of all parameters (lower means more informative)."""
    G = 0.0
    for mod in model.modalities:
        G += param_efe(mod.likelihood, mod.preference if use_preferences else None)
    for fac in model.factors:
        G -= transition_information(fac, model.concentration)
    return G


def _clamps(kind, cand, restrict):
    nf = len(cand.factors)
    initial = [None] * nf
    paths = [None] * nf
    if restrict is not None:
        f, mask = restrict
        if kind == "add_state" and f % nf == nf - 1:
            mask = np.append(mask, 0.0)
        initial[f % nf] = cand.factors[f % nf].initial * mask
    if kind == "add_state":
        initial[-1] = np.eye(cand.factors[-1].n_states)[-1]
    elif kind == "add_path":
        paths[-1] = np.eye(cand.factors[-1].n_paths)[-1]
    elif kind == "add_factor":
        initial[-1] = np.eye(2)[1]
    return initial, paths


def _joint_map(model, epoch, initial, path_prior):
    """Exact most probable joint path and state sequence (Viterbi per path combination)."""
    ns = model.n_states
    N = int(np.prod(ns))
    T = len(epoch)
    ll = joint_log_likelihood(model, epoch).reshape(T, N)
    priors = []
    logD = np.zeros(1)
    with np.errstate(divide="ignore"):
        for f, fac in enumerate(model.factors):
            D = fac.initial if initial is None or initial[f] is None else initial[f]
            E = fac.path_prior if path_prior is None or path_prior[f] is None else path_prior[f]
            logD = np.add.outer(logD, np.log(D / D.sum())).ravel()
            priors.append(np.log(E / E.sum()))
        Bs = [np.log(_safe_transition(fac.transition)) for fac in model.factors]
    best = (-np.inf, None, None)
    for combo in itertools.product(*[np.flatnonzero(np.isfinite(e)) for e in priors]):
        logT = np.zeros((1, 1))
        for B, u in zip(Bs, combo):
            logT = np.add.outer(logT, B[:, :, u]).transpose(0, 2, 1, 3).reshape(
                logT.shape[0] * B.shape[0], logT.shape[1] * B.shape[1]
            )
        delta = logD + ll[0]
        back = np.zeros((T, N), dtype=int)
        for t in range(1, T):
            cand = logT + delta[None, :]
            back[t] = np.argmax(cand, axis=1)
            delta = cand[np.arange(N), back[t]] + ll[t]
        score = delta.max() + sum(e[u] for e, u in zip(priors, combo))
        if score > best[0]:
            path = np.zeros(T, dtype=int)
            path[-1] = int(np.argmax(delta))
            for t in range(T - 1, 0, -1):
                path[t - 1] = back[t, path[t]]
            best = (score, combo, path)
    if best[1] is None:
        raise ValueError("observations have zero probability under every path")
    _, combo, path = best
    idx = np.unravel_index(path, ns)
    states = [np.eye(n)[i] for n, i in zip(ns, idx)]
    clamp = [np.eye(fac.n_paths)[u] for fac, u in zip(model.factors, combo)]
    return states, clamp


def assign(model, epoch, initial=None, path_prior=None):
    """Precise beliefs for an epoch: the most probable paths and states.

    Exact over the joint state space when it is small enough, otherwise the
    MAP path under mean-field beliefs and then MAP states given it.
    """
    N = int(np.prod(model.n_states))
    combos = int(np.prod(model.n_paths))
    if N * N * combos * max(len(epoch) - 1, 1) <= JOINT_MAP_BUDGET:
        return _joint_map(model, epoch, initial, path_prior)
    bel = infer_epoch(model, epoch, initial=initial, path_prior=path_prior)
    u = [int(np.argmax(q)) for q in bel.paths]
    clamp = [np.eye(len(q))[k] for q, k in zip(bel.paths, u)]
    if any(len(q) > 1 for q in bel.paths):
        bel = infer_epoch(model, epoch, initial=initial, path_prior=clamp)
    states = [np.eye(s.shape[1])[np.argmax(s, axis=1)] for s in bel.states]
    return states, clamp


def structural_free_energy(model, epoch, states, paths):
    """Free energy of an epoch under precise beliefs.

    Sum of the negative expected log likelihood of every outcome at its
    assigned state and the negative log probability of each assigned
    transition.
    """
    F = 0.0
    idx = [np.argmax(s, axis=1) for s in states]
    for g, mod in enumerate(model.modalities):
        la = log_likelihood_tensor(mod.likelihood)
        pidx = model.parent_indices(mod)
        for t, obs in enumerate(epoch):
            col = la[(slice(None),) + tuple(int(idx[p][t]) for p in pidx)]
            F -= float(np.dot(obs[g], col))
    for f, fac in enumerate(model.factors):
        u = int(np.argmax(paths[f]))
        b = fac.transition[:, :, u]
        for t in range(len(epoch) - 1):
            i, j = int(idx[f][t + 1]), int(idx[f][t])
            F -= math.log(max(b[i, j], COUNT_FLOOR) / b[:, j].sum())
    return F


def absorb(model, epoch, states, paths, alpha=SELECTION_ALPHA, gate=True):
    """Model after learning an epoch under precise beliefs.

    Likelihood counts go through the information gate; transitions
    accumulate directly.  Returns ``(model, p_update)``.
    """
    deltas = epoch_deltas(model, epoch, states)
    if gate:
        prop = propose(model, deltas, alpha)
        out = gated_update(model, prop)
        p = prop.p_update
    else:
        out = model.copy()
        for mod, d in zip(out.modalities, deltas):
            mod.likelihood = mod.likelihood + d
        p = 1.0
    for f, fac in enumerate(out.factors):
        u = int(np.argmax(paths[f]))
        s = states[f]
        for t in range(len(epoch) - 1):
            if u == 0:
                fac.transition[:, :, 0] += np.diag(s[t])
            else:
                fac.transition[:, :, u] += np.outer(s[t + 1], s[t])
    return out, p


def score_candidate(cand, epoch, alpha=SELECTION_ALPHA, restrict=None, gate=True):
    initial, paths = _clamps(cand.kind, cand.model, restrict)
    states, u = assign(cand.model, epoch, initial, paths)
    cand.updated, cand.p_update = absorb(cand.model, epoch, states, u, alpha, gate)
    cand.F = structural_free_energy(cand.updated, epoch, states, u)
    cand.G = model_efe(cand.updated)
    return cand


def select(candidates, hyperprior=None):
    """Pick among scored candidates; the first must be the parent.

    A candidate replaces the incumbent only if its free-energy change plus
    hyperprior beats the best so far and its expected free energy is lower
    than the parent's (``dG > 0``).  Ties keep the earlier candidate.
    """
    parent = candidates[0]
    best = parent
    best_score = 0.0
    for c in candidates:
        c.dF = c.F - parent.F
        c.dG = parent.G - c.G
        if c.kind == "add_state" and hyperprior is not None:
            c.dH = hyperprior.dH
        if c is parent:
            continue
        if c.dF + c.dH < best_score - 1e-9 and c.dG > 0:
            best = c
            best_score = c.dF + c.dH
    best.accepted = True
    return best


def score_and_select(candidates, epoch, hyperprior=None, alpha=SELECTION_ALPHA, restrict=None, gate=True):
    """Score candidates on an epoch and pick one with :func:`select`."""
    if not candidates:
        raise ValueError("no candidates to score")
    for c in candidates:
        score_candidate(c, epoch, alpha, restrict, gate)
    return select(candidates, hyperprior)


@dataclass
class IngestConfig:
    """Settings for :func:`ingest_stream`.

    ``labels`` (one per epoch) switch on label-restricted style learning:
    the first factor's states carry class labels, beliefs are restricted to
    states of the epoch's class, and ``hyperprior_N`` sets the style prior.
    """

    alpha: float = SELECTION_ALPHA
    kinds: tuple = KINDS
    labels: list = None
    hyperprior_N: int = None
    gate: bool = True


@dataclass
class IngestResult:
    model: object
    trace: list = field(default_factory=list)
    state_labels: list = None


TRACE_COLUMNS = ("epoch", "action", "n_states", "n_paths", "n_factors", "F", "MI", "dF", "dG", "dH")


def ingest_stream(model, epochs, config=None, state_labels=None):
    """Fold structure selection and learning over an ordered epoch stream."""
    config = config or IngestConfig()
    labels = config.labels
    trace = []
    if labels is not None and state_labels is None:
        state_labels = [None] * model.factors[0].n_states
    for k, epoch in enumerate(epochs):
        restrict = None
        hyper = None
        if labels is not None:
            mask = np.array([1.0 if lab == labels[k] else 0.0 for lab in state_labels])
            restrict = (0, mask)
            n_cls = int(mask.sum())
            if config.hyperprior_N:
                hyper = StyleHyperprior(config.hyperprior_N, n_cls)
        cands = expand_candidates(model, config.kinds)
        free = [] if labels is None else [i for i, lab in enumerate(state_labels) if lab is None]
        if labels is not None and mask.sum() == 0 and free:
            # an unlabelled state (the minimal model's own) takes the exemplar
            only = np.zeros(len(state_labels))
            only[free[0]] = 1.0
            best = score_candidate(cands[0], epoch, config.alpha, (0, only), gate=False)
            best.accepted = True
            state_labels[free[0]] = labels[k]
        elif labels is not None and mask.sum() == 0:
            # no state of this class yet: the new state is the only option
            cands = [c for c in cands if c.kind == "add_state"]
            best = score_candidate(cands[0], epoch, config.alpha, restrict, config.gate)
            best.dH = hyper.dH if hyper else 0.0
            best.accepted = True
        else:
            best = score_and_select(cands, epoch, hyper, config.alpha, restrict, config.gate)
        model = best.updated
        if labels is not None and best.kind == "add_state":
            state_labels.append(labels[k])
        problems = validate(model)
        if problems:
            raise RuntimeError(f"invalid model after epoch {k}: {problems[0]}")
        mi = sum(mutual_information(m.likelihood) for m in model.modalities)
        trace.append(
            (k, best.kind, model.n_states, model.n_paths, len(model.factors), best.F, mi, best.dF, best.dG, best.dH)
        )
    return IngestResult(model, trace, state_labels)


def write_trace(trace, path):
    """Discovery trace as CSV (tuples joined with ``;``)."""
    import csv

    def cell(v):
        if isinstance(v, tuple):
            return ";".join(str(x) for x in v)
        if isinstance(v, float):
            return format(v, ".10g")
        return str(v)

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow([cell(v) for v in row])


# ---------------------------------------------------------------------------
# reduction
# ---------------------------------------------------------------------------


def bmr(prior, posterior, reduced_prior):
    """Evidence gain of a reduced prior, column by column.

    Returns ``(dF, reduced_posterior)`` where ``dF`` is the increase in log
    marginal likelihood obtained by replacing ``prior`` with
    ``reduced_prior`` (positive when the reduced model is better), summed
    over the columns along the leading axis.
    """
    prior = np.asarray(prior, dtype=float)
    posterior = np.asarray(posterior, dtype=float)
    reduced_prior = np.asarray(reduced_prior, dtype=float)
    reduced_post = posterior + reduced_prior - prior
    if np.any(reduced_post <= 0) or np.any(reduced_prior <= 0):
        raise InfeasibleReductionError("reduction leaves a nonpositive count")
    cols = lambda x: x.reshape(x.shape[0], -1).T  # noqa: E731
    dF = 0.0
    for a, r, a0, r0 in zip(cols(posterior), cols(reduced_post), cols(prior), cols(reduced_prior)):
        dF += log_beta(r) + log_beta(a0) - log_beta(a) - log_beta(r0)
    return float(dF), reduced_post


@dataclass
class PruneReport:
    removed: int
    dF: float
    dF_per_modality: list


PRUNE_MARGIN = 0.5
REDUCED_COUNT = 1e-8


def _reduce_columns(a, a0, threshold, reduced):
    """Prune one count tensor column by column; returns ``(new, gain, removed)``."""
    flat = a.reshape(a.shape[0], -1)
    flat0 = a0.reshape(a.shape[0], -1)
    new = flat.copy()
    gain = 0.0
    removed = 0
    for j in range(flat.shape[1]):
        cut = flat[:, j] < threshold
        if not cut.any() or cut.all():
            continue
        r0 = np.where(cut, reduced, flat0[:, j])
        try:
            d, post = bmr(flat0[:, j], flat[:, j], r0)
        except InfeasibleReductionError:
            continue
        if d > 0:
            gone = post < 1e-6
            new[:, j] = np.where(gone, 0.0, post)
            gain += d
            removed += int(gone.sum())
    return new.reshape(a.shape), gain, removed


def prune(model, prior=None, margin=PRUNE_MARGIN, reduced=REDUCED_COUNT, modalities=None, transitions=False):
    """Remove counts that the data barely touched.

    In every likelihood column, cells whose posterior count is below
    ``concentration + margin`` get a near-zero reduced prior; the reduction
    is kept when it raises the column's evidence, and cells left with
    (essentially) no count are set to zero.  Columns the data never touched
    are left alone.  With ``transitions=True`` the non-stationary transition
    slices are reduced the same way.

    Returns ``(new_model, PruneReport)``; ``dF_per_modality`` lists the
    evidence gain of each modality (transitions are included in ``dF``).
    """
    out = model.copy()
    c = model.concentration
    total = 0.0
    removed = 0
    per = []
    idx = range(len(out.modalities)) if modalities is None else modalities
    for g in idx:
        mod = out.modalities[g]
        a0 = np.full_like(mod.likelihood, c) if prior is None else prior[g]
        mod.likelihood, gain, k = _reduce_columns(mod.likelihood, a0, c + margin, reduced)
        per.append(gain)
        total += gain
        removed += k
    if transitions:
        for fac in out.factors:
            if fac.n_paths < 2:
                continue
            b = fac.transition[:, :, 1:]
            new, gain, k = _reduce_columns(b, np.full_like(b, c), c + margin, reduced)
            fac.transition = np.concatenate([fac.transition[:, :, :1], new], axis=2)
            total += gain
            removed += k
    return out, PruneReport(removed, total, per)
