"""Brute-force reference computations.

These are slow, direct evaluations used to check the fast implementations:
mutual information by explicit summation, model-reduction evidence by
numerical integration over the simplex, and posteriors by enumerating every
path and state sequence.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln


def mi_double_loop(a):
    """Mutual information of a joint-normalised ``[levels, states]`` count matrix."""
    a = np.asarray(a, dtype=float)
    a = a.reshape(a.shape[0], -1)
    total = a.sum()
    L, S = a.shape
    po = [sum(a[o, s] for s in range(S)) / total for o in range(L)]
    ps = [sum(a[o, s] for o in range(L)) / total for s in range(S)]
    mi = 0.0
    for o in range(L):
        for s in range(S):
            p = a[o, s] / total
            if p > 0:
                mi += p * math.log(p / (po[o] * ps[s]))
    return mi


def _simplex_integral(e):
    """``int prod_i theta_i**e_i`` over the probability simplex, by quadrature.

    The simplex is peeled one coordinate at a time; each step is a 1-d
    integral with algebraic end-point weights, so exponents down to (but
    excluding) -1 are handled without losing accuracy at the corners.
    """
    e = [float(x) for x in e]
    if len(e) == 1:
        return 1.0
    rest = sum(e[1:]) + len(e) - 2
    head, _ = integrate.quad(lambda x: 1.0, 0.0, 1.0, weight="alg", wvar=(e[0], rest), epsabs=0.0, epsrel=1e-12)
    return head * _simplex_integral(e[1:])


def _log_norm(alpha):
    """Log normaliser of a Dirichlet density."""
    alpha = np.asarray(alpha, dtype=float)
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum())


def bmr_quadrature(prior, posterior, reduced):
    """Log evidence gain of a reduced prior for one Dirichlet column.

    ``ln E_posterior[Dir(theta; reduced) / Dir(theta; prior)]``.  The
    integrand is the unnormalised density ``prod theta**(a + r - a0 - 1)``
    times the three Dirichlet normalisers; the simplex integral is done
    numerically.
    """
    a0, a, r = (np.asarray(x, dtype=float) for x in (prior, posterior, reduced))
    val = _simplex_integral(a + r - a0 - 1)
    return math.log(val) + _log_norm(a) + _log_norm(r) - _log_norm(a0)


def enumerate_posterior(model, epoch):
    """Exact posterior of a model with point likelihoods, by enumeration.

    Likelihoods and transitions are the normalised counts.  Every factor's
    path and every joint state sequence is enumerated, so only tiny models
    are feasible.

    Returns
    -------
    marginals : list of ndarray
        ``[T, n_states]`` state marginals per factor.
    paths : list of ndarray
        Path posteriors per factor.
    log_evidence : float
    """
    ns = model.n_states
    nf = len(ns)
    T = len(epoch)
    A = []
    for mod in model.modalities:
        A.append(mod.likelihood / mod.likelihood.sum(axis=0, keepdims=True))
    B = [fac.transition / fac.transition.sum(axis=0, keepdims=True) for fac in model.factors]
    for f in range(nf):
        # the stationary path is the identity whatever its counts
        B[f][:, :, 0] = np.eye(ns[f])
    D = [fac.initial / fac.initial.sum() for fac in model.factors]
    E = [fac.path_prior / fac.path_prior.sum() for fac in model.factors]
    joint_states = list(itertools.product(*[range(n) for n in ns]))
    weights = {}
    for paths in itertools.product(*[range(len(e)) for e in E]):
        p_path = np.prod([E[f][u] for f, u in enumerate(paths)])
        if p_path == 0:
            continue
        for seq in itertools.product(joint_states, repeat=T):
            p = p_path
            for f in range(nf):
                p *= D[f][seq[0][f]]
                for t in range(1, T):
                    p *= B[f][seq[t][f], seq[t - 1][f], paths[f]]
            if p == 0:
                continue
            for t, obs in enumerate(epoch):
                for g, mod in enumerate(model.modalities):
                    idx = tuple(seq[t][i] for i in model.parent_indices(mod))
                    p *= float(np.dot(obs[g], A[g][(slice(None),) + idx]))
            weights[(paths, seq)] = p
    Z = sum(weights.values())
    marg = [np.zeros((T, n)) for n in ns]
    post_paths = [np.zeros(len(e)) for e in E]
    for (paths, seq), w in weights.items():
        for f in range(nf):
            post_paths[f][paths[f]] += w / Z
            for t in range(T):
                marg[f][t, seq[t][f]] += w / Z
    return marg, post_paths, math.log(Z)
