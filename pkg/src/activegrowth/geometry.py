"""Embedding of latent states by the divergence between their likelihoods.

Every latent state is a point on a statistical manifold: the categorical
distributions in its likelihood columns.  Symmetric KL (Jeffreys)
divergences between states are turned into a similarity matrix whose
principal eigenvectors give coordinates on a hypersphere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

EPS = 1e-8


class DegenerateEmbeddingError(ValueError):
    """Fewer than two states to embed."""


def _floor(p, axis=0):
    p = np.maximum(np.asarray(p, dtype=float), EPS)
    return p / p.sum(axis=axis, keepdims=True)


def jeffreys(p, q):
    """Symmetric KL divergence ``KL(p||q) + KL(q||p)`` after an epsilon floor."""
    p = _floor(p)
    q = _floor(q)
    return float(np.sum((p - q) * (np.log(p) - np.log(q))))


def pairwise_jeffreys(columns):
    """Jeffreys divergences between all columns of ``[levels, n]``."""
    P = _floor(columns)
    L = np.log(P)
    # sum_l (p_i - p_j)(ln p_i - ln p_j) expands into four inner products
    cross = P.T @ L
    self_term = np.diag(cross)
    return self_term[:, None] + self_term[None, :] - cross - cross.T


@dataclass
class Embedding:
    """Similarity matrix, its spectrum and the principal coordinates.

    Attributes
    ----------
    states : ndarray
        Indices of the embedded (joint) states.
    similarity : ndarray
        ``rho = 1 - Delta**2 / 2``, symmetric with a unit diagonal.
    eigenvalues : ndarray
        Eigenvalues of ``rho`` in descending order (unclamped).
    coordinates : ndarray
        ``[n_states, n_states]`` eigenvectors scaled by the square root of
        the clamped eigenvalues.
    stress : float
        Total magnitude of the negative eigenvalues that were clamped.
    """

    states: np.ndarray
    similarity: np.ndarray
    eigenvalues: np.ndarray
    coordinates: np.ndarray
    stress: float

    def chord_distances(self):
        x = self.coordinates
        sq = np.sum(x**2, axis=1)
        return np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0))


def divergence_matrix(model, states=None):
    """Root-sum-square over modalities of per-modality Jeffreys divergences."""
    D2 = None
    for mod in model.modalities:
        cols = mod.likelihood.reshape(mod.n_levels, -1)
        if states is not None:
            cols = cols[:, states]
        d = pairwise_jeffreys(cols)
        D2 = d**2 if D2 is None else D2 + d**2
    return np.sqrt(D2)


def similarity(D):
    """``rho = 1 - Delta**2 / 2`` with ``Delta = 2 D / max D``."""
    top = D.max()
    delta = 2 * D / top if top > 0 else np.zeros_like(D)
    rho = 1 - 0.5 * delta**2
    rho = 0.5 * (rho + rho.T)
    np.fill_diagonal(rho, 1.0)
    return rho


def embed(model, states=None):
    """Principal coordinates of latent states on the unit hypersphere.

    Parameters
    ----------
    model : GenerativeModel
    states : sequence of int, optional
        Joint state indices (columns of the matricised likelihoods) to
        embed; all of them by default.

    Returns
    -------
    Embedding
    """
    n = int(np.prod(model.n_states)) if states is None else len(states)
    if n < 2:
        raise DegenerateEmbeddingError("at least two states are needed")
    idx = np.arange(n) if states is None else np.asarray(states)
    rho = similarity(divergence_matrix(model, None if states is None else idx))
    vals, vecs = np.linalg.eigh(rho)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    # fix each eigenvector's sign so its largest-magnitude entry is positive
    big = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[big, np.arange(n)])
    clamped = np.maximum(vals, 0)
    stress = float(-vals[vals < 0].sum())
    return Embedding(idx, rho, vals, vecs * np.sqrt(clamped), stress)


def write_embedding(embedding, path, labels=None, k=3):
    """CSV with ``state, label, coord_1..coord_k``."""
    k = min(k, embedding.coordinates.shape[1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "label"] + [f"coord_{i + 1}" for i in range(k)])
        for row, s in enumerate(embedding.states):
            lab = "" if labels is None else labels[int(s)]
            w.writerow([int(s), lab] + [format(float(x), ".10g") for x in embedding.coordinates[row, :k]])
