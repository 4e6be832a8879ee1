"""Fisher discriminant analysis: scatter matrices, the generalized
eigenproblem, and projection to a reduced discriminant space.

Unlike the per-speaker eigenspaces, the discriminant basis needs data
from every class at once, so it is used here purely for dimension
reduction ahead of the mixture-model classifier.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .envelope import read_envelope, write_envelope
from .errors import ArgumentError, FormatError
from .features import FeatureMatrix

LDA_KIND = "lda-basis"


@dataclass
class ScatterPair:
    """Between- and within-class scatter plus the means that built them."""

    s_b: np.ndarray                  # (dims, dims)
    s_w: np.ndarray                  # (dims, dims)
    global_mean: np.ndarray          # (dims,)
    class_means: list[np.ndarray]


@dataclass
class LdaBasis:
    """Discriminant directions (columns) with their generalized eigenvalues."""

    directions: np.ndarray           # (dims, k)
    gen_eigenvalues: np.ndarray      # (k,), descending
    ridge: float

    @property
    def dims(self) -> int:
        return self.directions.shape[0]

    @property
    def k(self) -> int:
        return self.directions.shape[1]


def scatter_matrices(classes: list[tuple[str, FeatureMatrix]],
                     frame_weighted: bool = False) -> ScatterPair:
    """Between/within scatter from labeled per-class feature matrices.

    With the default class weighting, every class contributes ``1/S``
    regardless of its frame count and the global mean is the unweighted
    mean of class means, which makes the between-class scatter exactly
    the covariance of the class means.  ``frame_weighted=True`` switches
    both statistics to frame-count weighting.

    Raises
    ------
    ArgumentError
        Fewer than two classes, a class with fewer than two frames, or
        inconsistent dimensions.
    """
    if len(classes) < 2:
        raise ArgumentError(f"need at least 2 classes, got {len(classes)}")
    dims = classes[0][1].dims
    for label, x in classes:
        if x.dims != dims:
            raise ArgumentError(f"class {label}: dims {x.dims} != {dims}")
        if x.frames < 2:
            raise ArgumentError(f"class {label}: need at least 2 frames, got {x.frames}")

    class_means = [x.values.mean(axis=1) for _, x in classes]
    frame_counts = np.array([x.frames for _, x in classes], dtype=np.float64)
    if frame_weighted:
        weights = frame_counts / frame_counts.sum()
    else:
        weights = np.full(len(classes), 1.0 / len(classes))

    global_mean = np.zeros(dims)
    for w, mu in zip(weights, class_means):
        global_mean += w * mu

    s_b = np.zeros((dims, dims))
    s_w = np.zeros((dims, dims))
    for (label, x), w, mu in zip(classes, weights, class_means):
        d = mu - global_mean
        s_b += w * np.outer(d, d)
        centered = x.values - mu[:, None]
        s_w += (w / x.frames) * (centered @ centered.T)
        if float((centered ** 2).sum()) == 0.0:
            warnings.warn(
                f"class {label} has zero within-class variance; "
                "rely on the ridge when inverting the within-class scatter",
                RuntimeWarning,
                stacklevel=2,
            )
    s_b = 0.5 * (s_b + s_b.T)
    s_w = 0.5 * (s_w + s_w.T)
    return ScatterPair(s_b=s_b, s_w=s_w, global_mean=global_mean, class_means=class_means)


def lda_basis(scatter: ScatterPair, k: int, ridge: float | None = None) -> LdaBasis:
    """Top-k generalized eigenvectors of the scatter pencil.

    ``ridge`` defaults to ``1e-6 * trace(s_w) / dims``.  The between-class
    scatter of S classes has rank at most S-1, so asking for more
    directions than that yields near-zero eigenvalues; a warning is
    emitted rather than an error because the projection is still valid.
    """
    dims = scatter.s_b.shape[0]
    if not 1 <= k <= dims:
        raise ArgumentError(f"k={k} outside [1, {dims}]")
    if ridge is None:
        ridge = linalg.default_ridge(scatter.s_w)
    n_classes = len(scatter.class_means)
    if k > n_classes - 1:
        warnings.warn(
            f"requested {k} discriminant directions but between-class scatter "
            f"rank is at most {n_classes - 1}; trailing eigenvalues will be ~0",
            RuntimeWarning,
            stacklevel=2,
        )
    eig = linalg.solve_generalized_eig(scatter.s_b, scatter.s_w, ridge)
    return LdaBasis(
        directions=eig.eigenvectors[:, :k],
        gen_eigenvalues=eig.eigenvalues[:k],
        ridge=float(ridge),
    )


def project(basis: LdaBasis, x: FeatureMatrix) -> FeatureMatrix:
    """Project features to the discriminant space: ``Y = W.T @ X``."""
    if x.dims != basis.dims:
        raise ArgumentError(f"feature dims {x.dims} do not match basis dims {basis.dims}")
    return x.with_values(basis.directions.T @ x.values,
                         feature_kind=f"lda{basis.k}")


def save_basis(basis: LdaBasis, path) -> None:
    write_envelope(path, LDA_KIND, {
        "directions": basis.directions,
        "gen_eigenvalues": basis.gen_eigenvalues,
    }, meta={"ridge": basis.ridge})


def load_basis(path) -> LdaBasis:
    env = read_envelope(path, expected_kind=LDA_KIND)
    for name in ("directions", "gen_eigenvalues"):
        if name not in env.arrays:
            raise FormatError(f"{path}: basis file missing '{name}' array")
    directions = env.arrays["directions"]
    values = env.arrays["gen_eigenvalues"]
    if directions.ndim != 2 or values.shape != (directions.shape[1],):
        raise FormatError(f"{path}: inconsistent basis array shapes")
    return LdaBasis(directions=directions, gen_eigenvalues=values,
                    ridge=float(env.meta.get("ridge", 0.0)))
