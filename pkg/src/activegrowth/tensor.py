"""Small dense-tensor arithmetic shared by every other module.

Dirichlet count tensors are plain ``numpy`` arrays whose leading axis indexes
outcome (or next-state) levels and whose trailing axes index the states of
the parent factors.  Categorical beliefs are 1-d arrays that sum to one.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

__all__ = [
    "ShapeError",
    "DegenerateTensorError",
    "NumericDomainError",
    "check_categorical",
    "contract",
    "contract_all",
    "outer",
    "normalize",
    "elog",
    "softmax",
    "log_beta",
    "entropy",
    "kl_categorical",
]

MAX_ELEMENTS = 2**31


class ShapeError(ValueError):
    """Raised when tensor and vector dimensions disagree."""


class DegenerateTensorError(ValueError):
    """Raised when a column or a whole tensor has no mass."""


class NumericDomainError(ValueError):
    """Raised for arguments outside the domain of a special function."""


def check_categorical(p, atol=1e-9):
    """Return ``p`` as a float array after checking it is a valid distribution."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ShapeError(f"categorical must be a non-empty vector, got shape {p.shape}")
    if np.any(p < -atol) or abs(p.sum() - 1.0) > atol:
        raise ValueError("categorical must be nonnegative and sum to one")
    return p


def contract(t, v, axis=0):
    """Sum-product of tensor ``t`` with vector ``v`` over ``axis``.

    ``contract(A, s, 0)`` is the leading-dimension product written ``s . A`` in
    the message-passing literature; ``axis=-1`` gives the trailing version.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or t.ndim == 0 or t.shape[axis] != v.shape[0]:
        raise ShapeError(
            f"cannot contract vector of length {v.shape} with axis {axis} of {t.shape}"
        )
    return np.tensordot(t, v, axes=([axis], [0]))


def contract_all(t, vectors, skip=()):
    """Contract every trailing axis of ``t`` with the matching vector.

    ``vectors[i]`` is contracted against axis ``i + 1``; axes listed in
    ``skip`` (as indices into ``vectors``) are left free.  The result keeps
    the leading axis followed by the skipped axes in order.
    """
    t = np.asarray(t, dtype=float)
    if len(vectors) != t.ndim - 1:
        raise ShapeError(f"need {t.ndim - 1} vectors for tensor of shape {t.shape}")
    # contract from the last axis backwards so earlier axis indices stay valid
    for i in reversed(range(len(vectors))):
        if i in skip:
            continue
        t = contract(t, vectors[i], axis=i + 1)
    return t


def outer(vs):
    """Outer product of a list of vectors."""
    if len(vs) == 0:
        raise ValueError("outer needs at least one vector")
    out = np.asarray(vs[0], dtype=float)
    for v in vs[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out


def normalize(t, mode="columns"):
    """Normalise counts into probabilities.

    ``mode="columns"`` makes every leading-axis fibre sum to one (the
    conditional distribution encoded by each column); ``mode="joint"``
    divides by the total so the whole tensor is a joint distribution.
    """
    t = np.asarray(t, dtype=float)
    if mode == "columns":
        s = t.sum(axis=0, keepdims=True)
        if np.any(s <= 0):
            raise DegenerateTensorError("tensor has a zero column")
        return t / s
    if mode == "joint":
        total = t.sum()
        if total <= 0:
            raise DegenerateTensorError("tensor has zero total mass")
        return t / total
    raise ValueError(f"unknown normalisation mode {mode!r}")


def elog(t):
    """Expected log probabilities under Dirichlet counts.

    Each entry is ``psi(count) - psi(column sum)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NumericDomainError("elog requires strictly positive counts")
    return digamma(t) - digamma(t.sum(axis=0, keepdims=True))


def softmax(x, precision=1.0):
    """Softmax of ``precision * x``, stabilised by max subtraction."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("softmax input contains NaN")
    z = precision * x
    finite = np.isfinite(z)
    if not finite.any():
        # every entry -inf (or +inf): fall back to the entries at the maximum
        z = np.where(z == z.max(), 0.0, -np.inf)
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def log_beta(counts):
    """Log of the multivariate beta function of a positive count vector."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise NumericDomainError("log_beta requires strictly positive counts")
    return float(np.sum(gammaln(counts)) - gammaln(np.sum(counts)))


def entropy(p, axis=None):
    """Shannon entropy in nats; zero-probability entries contribute nothing."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=axis)


def kl_categorical(p, q):
    """KL divergence between two categorical distributions (nats)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return float(terms.sum())
