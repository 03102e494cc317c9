"""Factorised discrete generative model and its on-disk format.

A model is a set of hidden-state *factors* (each with its own states and
paths) and a set of outcome *modalities*.  All probabilistic mappings are
stored as Dirichlet counts:

* ``Factor.transition`` -- counts of shape ``[n_states, n_states, n_paths]``
  indexed ``[next, previous, path]``.  Path 0 is always the stationary
  (identity) path.
* ``Factor.initial`` and ``Factor.path_prior`` -- priors over the first
  state and over paths.
* ``Modality.likelihood`` -- counts of shape ``[n_levels, *parent_states]``.

Observations are lists holding one probability vector per modality (in model
order); an epoch is a short list of observations.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
MODEL_FORMAT = "activegrowth.model"
EPOCHS_FORMAT = "activegrowth.epochs"

# Default hyperparameters.  The likelihood concentration follows the 1/16
# used for the MNIST and sprite studies; alpha=8 is the soft gating regime.
DEFAULT_CONCENTRATION = 1.0 / 16.0
DEFAULT_ALPHA = 8.0
DEFAULT_PLANNING_DEPTH = 1
# stationary-path counts live on the diagonal of path 0
STATIONARY_COUNT = 1.0


class ModelFormatError(ValueError):
    """Malformed model or epoch stream."""


class VersionError(ModelFormatError):
    """Stream written by an incompatible format version."""


@dataclass
class Factor:
    id: str
    transition: np.ndarray
    initial: np.ndarray
    path_prior: np.ndarray
    controllable: bool = False

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_paths(self):
        return self.transition.shape[2]

    def transition_matrix(self):
        """Column-normalised transition probabilities ``B[next, prev, path]``."""
        b = self.transition
        return b / b.sum(axis=0, keepdims=True)

    def copy(self):
        return Factor(
            self.id,
            self.transition.copy(),
            self.initial.copy(),
            self.path_prior.copy(),
            self.controllable,
        )


@dataclass
class Modality:
    id: str
    likelihood: np.ndarray
    preference: np.ndarray
    parents: list = field(default_factory=list)

    @property
    def n_levels(self):
        return self.likelihood.shape[0]

    def copy(self):
        return Modality(
            self.id, self.likelihood.copy(), self.preference.copy(), list(self.parents)
        )


@dataclass
class GenerativeModel:
    factors: list
    modalities: list
    concentration: float = DEFAULT_CONCENTRATION
    alpha: float = DEFAULT_ALPHA
    planning_depth: int = DEFAULT_PLANNING_DEPTH

    def copy(self):
        return GenerativeModel(
            [f.copy() for f in self.factors],
            [m.copy() for m in self.modalities],
            self.concentration,
            self.alpha,
            self.planning_depth,
        )

    def factor_index(self, factor_id):
        for i, f in enumerate(self.factors):
            if f.id == factor_id:
                return i
        raise KeyError(factor_id)

    def parent_indices(self, modality):
        return [self.factor_index(p) for p in modality.parents]

    @property
    def n_states(self):
        return tuple(f.n_states for f in self.factors)

    @property
    def n_paths(self):
        return tuple(f.n_paths for f in self.factors)

    def structure(self):
        """``(states per factor, paths per factor)``."""
        return self.n_states, self.n_paths

    def __eq__(self, other):
        if not isinstance(other, GenerativeModel):
            return NotImplemented
        return serialize(self) == serialize(other)


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------


def stationary_transition(n_states, count=STATIONARY_COUNT):
    """Identity transition counts with a single (stationary) path."""
    return (np.eye(n_states) * count)[:, :, None]


def new_factor(factor_id, n_states=1, controllable=False):
    return Factor(
        factor_id,
        stationary_transition(n_states),
        np.ones(n_states),
        np.ones(1),
        controllable,
    )


def new_minimal(modalities, concentration=DEFAULT_CONCENTRATION, factor_id="f0", **kwargs):
    """A model with one factor holding a single state and a single path.

    ``modalities`` is a list of ``(id, n_levels)`` pairs.  Every likelihood
    column starts as a symmetric Dirichlet with the given concentration.
    """
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    if not modalities:
        raise ValueError("need at least one modality")
    mods = [
        Modality(mid, np.full((n, 1), float(concentration)), np.zeros(n), [factor_id])
        for mid, n in modalities
    ]
    return GenerativeModel([new_factor(factor_id)], mods, float(concentration), **kwargs)


def validate(model):
    """List every violated model invariant (empty when the model is sound)."""
    problems = []
    if not model.factors:
        problems.append("model has no factors")
    if not model.modalities:
        problems.append("model has no modalities")
    ids = [f.id for f in model.factors]
    if len(set(ids)) != len(ids):
        problems.append("duplicate factor ids")
    for f in model.factors:
        b = f.transition
        if b.ndim != 3 or b.shape[0] != b.shape[1]:
            problems.append(f"factor {f.id}: transition shape {b.shape} is not [n, n, paths]")
            continue
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            problems.append(f"factor {f.id}: transition has negative or non-finite counts")
        colsum = b.sum(axis=0)
        if np.any(colsum <= 0):
            bad = np.argwhere(colsum <= 0)[0]
            problems.append(
                f"factor {f.id}: transition column (state {bad[0]}, path {bad[1]}) has no mass"
            )
        else:
            stationary = b[:, :, 0] / colsum[None, :, 0]
            if not np.array_equal(stationary, np.eye(f.n_states)):
                problems.append(f"factor {f.id}: path 0 of the transition tensor is not the identity")
        if f.initial.shape != (f.n_states,) or np.any(f.initial < 0) or f.initial.sum() <= 0:
            problems.append(f"factor {f.id}: initial-state prior is malformed")
        if f.path_prior.shape != (f.n_paths,) or np.any(f.path_prior < 0) or f.path_prior.sum() <= 0:
            problems.append(f"factor {f.id}: path prior is malformed")
    for m in model.modalities:
        a = m.likelihood
        missing = [p for p in m.parents if p not in ids]
        if missing:
            problems.append(f"modality {m.id}: parent factor(s) {missing} do not exist")
            continue
        if m.n_levels < 2:
            problems.append(f"modality {m.id}: needs at least two outcome levels")
        expected = tuple(model.factors[model.factor_index(p)].n_states for p in m.parents)
        if a.shape[1:] != expected:
            problems.append(
                f"modality {m.id}: likelihood trailing shape {a.shape[1:]} != parent states {expected}"
            )
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            problems.append(f"modality {m.id}: likelihood has negative or non-finite counts")
        elif np.any(a.sum(axis=0) <= 0):
            problems.append(f"modality {m.id}: likelihood has an all-zero column")
        if a.size >= 2**31:
            problems.append(f"modality {m.id}: likelihood too large")
        if m.preference.shape != (m.n_levels,) or not np.all(np.isfinite(m.preference)):
            problems.append(f"modality {m.id}: preference must be a finite vector over levels")
    if model.concentration <= 0:
        problems.append("concentration must be positive")
    if model.alpha <= 0:
        problems.append("alpha must be positive")
    if model.planning_depth < 1:
        problems.append("planning depth must be at least 1")
    return problems


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(x):
    return format(float(x), ".17g")


def _encode(obj):
    """Deterministic JSON text; arrays carry an explicit shape."""
    if isinstance(obj, np.ndarray):
        data = ",".join(_fmt(v) for v in obj.ravel())
        shape = ",".join(str(int(s)) for s in obj.shape)
        return f'{{"data":[{data}],"shape":[{shape}]}}'
    if isinstance(obj, dict):
        items = ",".join(f"{json.dumps(k)}:{_encode(v)}" for k, v in sorted(obj.items()))
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot encode {type(obj)}")


def _array(node, what):
    try:
        shape = tuple(int(s) for s in node["shape"])
        data = np.array(node["data"], dtype=float)
        return data.reshape(shape)
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFormatError(f"bad array for {what}: {err}") from None


def _loads(stream, fmt):
    if isinstance(stream, (bytes, bytearray)):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as err:
            raise ModelFormatError(f"stream is not UTF-8 (byte offset {err.start})") from None
    try:
        doc = json.loads(stream)
    except json.JSONDecodeError as err:
        raise ModelFormatError(f"parse error at byte offset {err.pos}: {err.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise ModelFormatError(f"not a {fmt} stream")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionError(f"unsupported version {doc.get('version')!r} (expected {FORMAT_VERSION})")
    return doc


def serialize(model):
    """Encode ``model`` as UTF-8 JSON bytes (``.gm.json``)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "concentration": float(model.concentration),
        "alpha": float(model.alpha),
        "planning_depth": int(model.planning_depth),
        "factors": [
            {
                "id": f.id,
                "controllable": bool(f.controllable),
                "transition": f.transition,
                "initial": f.initial,
                "path_prior": f.path_prior,
            }
            for f in model.factors
        ],
        "modalities": [
            {
                "id": m.id,
                "parents": list(m.parents),
                "likelihood": m.likelihood,
                "preference": m.preference,
            }
            for m in model.modalities
        ],
    }
    return (_encode(doc) + "\n").encode("utf-8")


def deserialize(stream):
    """Inverse of :func:`serialize`."""
    doc = _loads(stream, MODEL_FORMAT)
    try:
        factors = [
            Factor(
                str(f["id"]),
                _array(f["transition"], "transition"),
                _array(f["initial"], "initial"),
                _array(f["path_prior"], "path_prior"),
                bool(f["controllable"]),
            )
            for f in doc["factors"]
        ]
        modalities = [
            Modality(
                str(m["id"]),
                _array(m["likelihood"], "likelihood"),
                _array(m["preference"], "preference"),
                [str(p) for p in m["parents"]],
            )
            for m in doc["modalities"]
        ]
        return GenerativeModel(
            factors,
            modalities,
            float(doc["concentration"]),
            float(doc["alpha"]),
            int(doc["planning_depth"]),
        )
    except (KeyError, TypeError) as err:
        raise ModelFormatError(f"missing or malformed field: {err}") from None


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(serialize(model))


def load_model(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def serialize_epochs(epochs, modality_ids):
    """Encode an observation stream (``.epochs.json``)."""
    doc = {
        "format": EPOCHS_FORMAT,
        "version": FORMAT_VERSION,
        "modalities": list(modality_ids),
        "epochs": [[[np.asarray(o, dtype=float) for o in obs] for obs in ep] for ep in epochs],
    }
    return (_encode(doc) + "\n").encode("utf-8")


def deserialize_epochs(stream):
    """Return ``(epochs, modality_ids)``."""
    doc = _loads(stream, EPOCHS_FORMAT)
    epochs = [
        [[_array(o, "observation") for o in obs] for obs in ep] for ep in doc["epochs"]
    ]
    return epochs, list(doc["modalities"])


def copy_model(model):
    return copy.deepcopy(model)
