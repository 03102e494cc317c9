"""Variational inference over hidden states and paths.

Within a factor, beliefs over ``(path, s_0, ..., s_T-1)`` are computed
exactly by a forward-backward pass per path; factors are coupled by a
structured mean-field approximation and updated by coordinate descent on the
variational free energy.  Each sweep updates every factor once, so the free
energy can only go down from sweep to sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, elog

TOLERANCE = 1e-4
MAX_SWEEPS = 16
COUNT_FLOOR = 1e-12
LOG_FLOOR = float(np.log(COUNT_FLOOR))


@dataclass
class BeliefState:
    """Posterior beliefs for one epoch.

    Attributes
    ----------
    states : list of ndarray
        ``states[f]`` has shape ``[T, n_states(f)]``.
    paths : list of ndarray
        ``paths[f]`` is the posterior over the paths of factor ``f``.
    F : float
        Variational free energy (nats).
    trace : list of float
        Free energy after initialisation and after every sweep.
    """

    states: list
    paths: list
    F: float
    trace: list = field(default_factory=list)
    converged: bool = True
    smoothed: bool = True
    complexity: float = 0.0
    accuracy: float = 0.0
    factor_kl: list = None

    @property
    def n_steps(self):
        return self.states[0].shape[0]

    def map_states(self, t=-1):
        return tuple(int(np.argmax(s[t])) for s in self.states)


# ---------------------------------------------------------------------------
# likelihood terms
# ---------------------------------------------------------------------------


def _safe(counts):
    return np.maximum(counts, COUNT_FLOOR)


def log_likelihood_tensor(counts, use_digamma=True):
    """Expected log likelihood of a count tensor."""
    counts = _safe(counts)
    if use_digamma:
        # cells pruned to zero count would otherwise score about -1/floor
        return np.maximum(elog(counts), LOG_FLOOR)
    return np.log(counts / counts.sum(axis=0, keepdims=True))


def _aligned(tensor, parent_idx, n_factors):
    """Permute/reshape a parent-indexed tensor so it broadcasts over all factors."""
    order = np.argsort(parent_idx)
    tensor = np.transpose(tensor, order)
    shape = [1] * n_factors
    for ax, p in enumerate(np.asarray(parent_idx)[order]):
        shape[p] = tensor.shape[ax]
    return tensor.reshape(shape)


def joint_log_likelihood(model, epoch, use_digamma=True, cache=None):
    """Log likelihood of every observation under every joint state.

    Returns an array of shape ``[T, *n_states]``.
    """
    ns = model.n_states
    out = np.zeros((len(epoch),) + ns)
    for g, mod in enumerate(model.modalities):
        if cache is not None and g in cache:
            la = cache[g]
        else:
            la = log_likelihood_tensor(mod.likelihood, use_digamma)
            if cache is not None:
                cache[g] = la
        pidx = model.parent_indices(mod)
        for t, obs in enumerate(epoch):
            o = np.asarray(obs[g], dtype=float)
            if o.shape[0] != mod.n_levels:
                raise ShapeError(f"observation for {mod.id} has {o.shape[0]} levels")
            term = np.tensordot(o, la, axes=([0], [0]))
            out[t] += _aligned(term, pidx, len(ns))
    return out


def _contract_others(ll_t, marginals, keep):
    """Contract a joint tensor with every factor marginal except ``keep``."""
    t = ll_t
    for f in reversed(range(len(marginals))):
        if f == keep:
            continue
        t = np.tensordot(t, marginals[f], axes=([f], [0]))
    return t


def likelihood_message(model, obs, beliefs, factor, t=0, use_digamma=True):
    """Log-domain message to ``factor`` from all modalities at one time.

    Co-parent factors are averaged under their current posteriors.  The
    result has one entry per state of ``factor``.
    """
    others = [s[t] for s in beliefs.states]
    msg = np.zeros(model.factors[factor].n_states)
    for g, mod in enumerate(model.modalities):
        pidx = model.parent_indices(mod)
        if factor not in pidx:
            continue
        la = log_likelihood_tensor(mod.likelihood, use_digamma)
        term = np.tensordot(np.asarray(obs[g], dtype=float), la, axes=([0], [0]))
        # contract co-parents from the back so axis positions stay valid
        for ax in reversed(range(len(pidx))):
            if pidx[ax] != factor:
                term = np.tensordot(term, others[pidx[ax]], axes=([ax], [0]))
        msg += term
    return msg


def _messages(ll, marginals, f):
    """Per-time likelihood messages for factor ``f``; shape ``[T, n_f]``."""
    T = ll.shape[0]
    return np.stack([_contract_others(ll[t], [m[t] for m in marginals], f) for t in range(T)])


# ---------------------------------------------------------------------------
# exact single-factor inference
# ---------------------------------------------------------------------------


def _normalised(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


def _factor_posterior(msg, B, D, E):
    """Exact posterior of one factor given log-likelihood messages.

    Parameters
    ----------
    msg : ndarray [T, n]
    B : ndarray [n, n, paths]
        Normalised transitions ``B[next, prev, path]``.
    D, E : ndarray
        Normalised initial-state and path priors.

    Returns
    -------
    smoothed : ndarray [T, n]
    filtered : ndarray [T, n]
    q_path : ndarray [paths]
    log_z : float
        Log normaliser, including the max-shift of the messages.
    kl : float
        KL divergence of the factor posterior from its prior.
    """
    T, n = msg.shape
    n_paths = B.shape[2]
    # shift each step by its best state among those the prior can reach, so
    # a clamped prior never sees only underflowed likelihoods
    reach = np.zeros((T, n), dtype=bool)
    reach[0] = D > 0
    B_any = B[:, :, E > 0].sum(axis=2)
    for t in range(1, T):
        reach[t] = B_any @ reach[t - 1] > 0
    masked = np.where(reach, msg, -np.inf)
    shift = np.where(reach.any(axis=1), masked.max(axis=1), msg.max(axis=1))[:, None]
    lik = np.exp(masked - shift)
    log_zu = np.full(n_paths, -np.inf)
    post_u = np.zeros((n_paths, T, n))
    alpha_u = np.zeros((n_paths, T, n))
    log_cum = np.full((n_paths, T), -np.inf)
    for u in range(n_paths):
        if E[u] <= 0:
            continue
        Bu = B[:, :, u]
        alpha = np.zeros((T, n))
        scale = np.zeros(T)
        a = D * lik[0]
        feasible = True
        for t in range(T):
            if t > 0:
                a = (Bu @ alpha[t - 1]) * lik[t]
            c = a.sum()
            if c <= 0:
                feasible = False
                break
            scale[t] = c
            alpha[t] = a / c
        if not feasible:
            continue
        beta = np.ones(n)
        post = np.zeros((T, n))
        post[T - 1] = alpha[T - 1]
        for t in range(T - 2, -1, -1):
            beta = Bu.T @ (lik[t + 1] * beta) / scale[t + 1]
            p = alpha[t] * beta
            post[t] = p / p.sum()
        post_u[u] = post
        alpha_u[u] = alpha
        log_cum[u] = np.cumsum(np.log(scale))
        log_zu[u] = log_cum[u, -1]
    with np.errstate(divide="ignore"):
        log_e = np.log(E)
    lw = log_e + log_zu
    top = lw.max()
    if not np.isfinite(top):
        raise ValueError("observations have zero probability under every path")
    w = np.exp(lw - top)
    log_z = top + np.log(w.sum()) + shift.sum()
    q_path = w / w.sum()
    smoothed = np.einsum("u,utn->tn", q_path, post_u)
    # filtering weights each path by the evidence seen so far
    lf = log_e[:, None] + log_cum
    wf = np.exp(lf - lf.max(axis=0, keepdims=True))
    wf = wf / wf.sum(axis=0, keepdims=True)
    filt = np.einsum("ut,utn->tn", wf, alpha_u)
    kl = float(np.sum(smoothed * msg)) - log_z
    return smoothed, filt, q_path, log_z, max(kl, 0.0)


def _prior_marginals(B, D, E, T):
    Bm = np.einsum("ijk,k->ij", B, E)
    out = np.zeros((T, len(D)))
    out[0] = D
    for t in range(1, T):
        out[t] = Bm @ out[t - 1]
    return out


def _expected_ll(ll, marginals):
    total = 0.0
    for t in range(ll.shape[0]):
        x = ll[t]
        for f in reversed(range(len(marginals))):
            x = np.tensordot(x, marginals[f][t], axes=([f], [0]))
        total += float(x)
    return total


def infer_epoch(
    model,
    epoch,
    mode="smooth",
    tol=TOLERANCE,
    max_sweeps=MAX_SWEEPS,
    initial=None,
    path_prior=None,
    use_digamma=True,
    cache=None,
):
    """Posterior beliefs over states and paths for one epoch.

    Parameters
    ----------
    model : GenerativeModel
    epoch : list of observations
    mode : {"smooth", "filter"}
        ``"filter"`` reports forward-only state marginals; path posteriors
        and the free energy always use the whole epoch.
    initial, path_prior : list, optional
        Per-factor overrides (``None`` entries keep the model prior).  Used
        to clamp beliefs to precise priors during structure scoring.
    use_digamma : bool
        Use digamma expectations of the likelihood counts (default) or the
        log of their normalised means.
    """
    if len(epoch) == 0:
        raise ValueError("epoch must contain at least one observation")
    if mode not in ("smooth", "filter"):
        raise ValueError(f"unknown mode {mode!r}")
    T = len(epoch)
    nf = len(model.factors)
    ll = joint_log_likelihood(model, epoch, use_digamma, cache)
    Bs, Ds, Es = [], [], []
    for f, fac in enumerate(model.factors):
        Bs.append(_safe_transition(fac.transition))
        D = fac.initial if initial is None or initial[f] is None else initial[f]
        E = fac.path_prior if path_prior is None or path_prior[f] is None else path_prior[f]
        Ds.append(_normalised(D))
        Es.append(_normalised(E))

    marg = [_prior_marginals(Bs[f], Ds[f], Es[f], T) for f in range(nf)]
    filt = [m.copy() for m in marg]
    paths = [Es[f].copy() for f in range(nf)]
    kls = np.zeros(nf)
    acc = _expected_ll(ll, marg)
    F = -acc
    trace = [F]
    converged = False
    for _ in range(max_sweeps):
        for f in range(nf):
            msg = _messages(ll, marg, f)
            marg[f], filt[f], paths[f], _, kls[f] = _factor_posterior(msg, Bs[f], Ds[f], Es[f])
        acc = _expected_ll(ll, marg)
        F_new = float(kls.sum() - acc)
        trace.append(F_new)
        delta = abs(F - F_new)
        F = F_new
        # a single factor is solved exactly in one sweep
        if delta < tol or nf == 1:
            converged = True
            break
    states = marg if mode == "smooth" else filt
    return BeliefState(
        [s.copy() for s in states],
        paths,
        F,
        trace,
        converged,
        mode == "smooth",
        float(kls.sum()),
        acc,
        [float(k) for k in kls],
    )


def _safe_transition(b):
    b = _safe(b) if np.any(b <= 0) else b
    B = b / b.sum(axis=0, keepdims=True)
    # the floor must not leak mass into the stationary path
    B[:, :, 0] = np.eye(b.shape[0])
    return B


def free_energy(model, epoch, beliefs, use_digamma=True):
    """Variational free energy of factorised beliefs.

    Complexity is the KL divergence of each factor's joint posterior over
    paths and state sequences from its prior; accuracy is the expected log
    likelihood.  Beliefs from :func:`infer_epoch` carry their exact
    per-factor complexity.  Otherwise each factor's belief is read as fully
    factorised over paths and time steps.
    """
    ll = joint_log_likelihood(model, epoch, use_digamma)
    acc = _expected_ll(ll, beliefs.states)
    if beliefs.factor_kl is not None:
        return float(sum(beliefs.factor_kl) - acc)
    complexity = 0.0
    for f, fac in enumerate(model.factors):
        B = _safe_transition(fac.transition)
        complexity += _chain_kl(
            beliefs.states[f], beliefs.paths[f], B, _normalised(fac.initial), _normalised(fac.path_prior)
        )
    return float(complexity - acc)


def _chain_kl(s, q, B, D, E):
    """KL of a belief factorised over paths and time steps from the prior."""
    eps = 1e-300
    kl = float(np.sum(q * (np.log(q + eps) - np.log(E + eps))))
    kl += float(np.sum(s[0] * (np.log(s[0] + eps) - np.log(D + eps))))
    Bm = np.einsum("ijk,k->ij", np.log(B + eps), q)
    for t in range(1, s.shape[0]):
        kl += float(np.sum(s[t] * np.log(s[t] + eps)) - s[t] @ Bm @ s[t - 1])
    return kl


def infer_paths(model, beliefs, epoch=None, neg_efe=None):
    """Mean-field path posteriors from state beliefs.

    ``q(u) = softmax(ln E(u) + sum_t s_{t+1} . ln B(u) . s_t)``; controllable
    factors may add ``-G`` via ``neg_efe`` (a list of per-factor vectors).
    With a single time step the path prior is returned unchanged.
    """
    out = []
    for f, fac in enumerate(model.factors):
        E = _normalised(fac.path_prior)
        s = beliefs.states[f]
        if s.shape[0] < 2:
            out.append(E.copy())
            continue
        with np.errstate(divide="ignore"):
            logB = np.log(np.maximum(_safe_transition(fac.transition), COUNT_FLOOR))
            logit = np.log(E)
        for t in range(s.shape[0] - 1):
            logit = logit + np.einsum("i,iju,j->u", s[t + 1], logB, s[t])
        if neg_efe is not None and neg_efe[f] is not None and fac.controllable:
            logit = logit + neg_efe[f]
        logit = logit - logit.max()
        p = np.exp(logit)
        out.append(p / p.sum())
    return out
