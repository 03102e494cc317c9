"""Handwritten-digit data: IDX files, preprocessing and pixel outcomes.

Images are smoothed, histogram-equalised and scaled to ``[0, 1]``; each
retained pixel becomes a binary modality whose outcome is ``[1 - p, p]``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
UBYTE = 0x08
SAMPLE_IMAGES = "sample-images-idx3-ubyte"
SAMPLE_LABELS = "sample-labels-idx1-ubyte"


class IdxFormatError(ValueError):
    """Malformed or truncated IDX file."""


def write_idx(path, array):
    """Write an unsigned-byte array in IDX layout (big-endian dimensions)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        if array.min() < 0 or array.max() > 255:
            raise ValueError("IDX ubyte data must lie in [0, 255]")
        array = array.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">HBB", 0, UBYTE, array.ndim))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def read_idx(path, magic=None):
    """Read an unsigned-byte IDX file.

    Parameters
    ----------
    magic : int, optional
        Expected magic number (2051 for images, 2049 for labels).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: file too short for a header")
    zero, dtype, ndim = struct.unpack(">HBB", raw[:4])
    found = (dtype << 8) | ndim
    if zero != 0 or dtype != UBYTE:
        raise IdxFormatError(f"{path}: bad magic number {found}")
    if magic is not None and found != magic:
        raise IdxFormatError(f"{path}: magic number {found}, expected {magic}")
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise IdxFormatError(f"{path}: truncated dimensions")
    shape = struct.unpack(f">{ndim}I", raw[4:head])
    size = int(np.prod(shape))
    if len(raw) - head != size:
        raise IdxFormatError(f"{path}: expected {size} data bytes, found {len(raw) - head}")
    return np.frombuffer(raw, dtype=np.uint8, offset=head).reshape(shape)


def write_bundled_sample(directory):
    """Write the 5000-image sample shipped with mlxtend as IDX files.

    Returns ``(images_path, labels_path)``.
    """
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    os.makedirs(directory, exist_ok=True)
    images = os.path.join(directory, SAMPLE_IMAGES)
    labels = os.path.join(directory, SAMPLE_LABELS)
    write_idx(images, X.reshape(-1, 28, 28).astype(np.uint8))
    write_idx(labels, y.astype(np.uint8))
    return images, labels


def equalize(image):
    """Histogram equalisation mapping the darkest value to 0 and the brightest to 1.

    A constant image is returned unchanged.
    """
    values, inverse, counts = np.unique(image, return_inverse=True, return_counts=True)
    if len(values) < 2:
        return np.asarray(image, dtype=float)
    cdf = np.cumsum(counts).astype(float)
    mapped = (cdf - cdf[0]) / (cdf[-1] - cdf[0])
    return mapped[inverse].reshape(image.shape)


def preprocess(images, sigma=1.0, truncate=2.0):
    """Smooth, equalise and scale ``[n, h, w]`` byte images to ``[0, 1]``."""
    out = np.empty(images.shape, dtype=float)
    for i, img in enumerate(images):
        smooth = gaussian_filter(img.astype(float) / 255.0, sigma, truncate=truncate, mode="constant")
        out[i] = np.clip(equalize(smooth), 0.0, 1.0)
    return out


def select_pixels(images, k):
    """Indices of the ``k`` pixels with highest variance across images (stable order)."""
    flat = images.reshape(len(images), -1)
    var = flat.var(axis=0)
    return np.sort(np.argsort(-var, kind="stable")[:k])


def pixel_observation(values):
    """Binary outcomes ``[1 - p, p]`` for a vector of pixel probabilities."""
    return [np.array([1.0 - p, p]) for p in values]


@dataclass
class MnistConfig:
    """Where the digits come from and how they are reduced.

    Without separate test files the test exemplars are those following the
    first ``n_train`` of each class.
    """

    images: str
    labels: str
    test_images: str = None
    test_labels: str = None
    classes: tuple = (0, 1)
    n_train: int = 256
    n_test: int = 200
    sigma: float = 1.0
    truncate: float = 2.0
    n_pixels: int = 128


@dataclass
class MnistData:
    train: np.ndarray
    train_labels: np.ndarray
    test: np.ndarray
    test_labels: np.ndarray
    pixels: np.ndarray

    def observations(self, split="train"):
        X = self.train if split == "train" else self.test
        return [pixel_observation(x) for x in X]


def _per_class(X, y, classes, start, count):
    keep = []
    for c in classes:
        idx = np.flatnonzero(y == c)[start : start + count]
        if len(idx) < count:
            raise ValueError(f"only {len(idx)} exemplars of class {c} available")
        keep.append(idx)
    # interleave classes so that every prefix of the stream is balanced
    order = np.stack(keep, axis=1).ravel()
    return X[order], y[order]


def load_mnist(config):
    """Preprocessed train and test pixel probabilities restricted to informative pixels."""
    X = read_idx(config.images, IMAGE_MAGIC)
    y = read_idx(config.labels, LABEL_MAGIC)
    if len(X) != len(y):
        raise IdxFormatError("image and label counts differ")
    Xtr, ytr = _per_class(X, y, config.classes, 0, config.n_train)
    if config.test_images:
        Xt = read_idx(config.test_images, IMAGE_MAGIC)
        yt = read_idx(config.test_labels, LABEL_MAGIC)
        Xte, yte = _per_class(Xt, yt, config.classes, 0, config.n_test)
    else:
        Xte, yte = _per_class(X, y, config.classes, config.n_train, config.n_test)
    Ptr = preprocess(Xtr, config.sigma, config.truncate)
    Pte = preprocess(Xte, config.sigma, config.truncate)
    pixels = select_pixels(Ptr, config.n_pixels)
    flat = lambda P: P.reshape(len(P), -1)[:, pixels]
    return MnistData(flat(Ptr), ytr.astype(int), flat(Pte), yte.astype(int), pixels)
