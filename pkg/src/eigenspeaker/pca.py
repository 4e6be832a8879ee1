"""Per-speaker PCA eigenspaces and the PCS / TES / mixed classifiers.

Each speaker gets an orthonormal basis from the eigendecomposition of the
covariance of their enrollment frames.  A test clip is scored against a
speaker by summing, over frames, the norm of the mean-shifted frame's
coordinates in the leading ``k_p`` basis directions (principal component
space, large means familiar) and in the trailing ``k_t`` directions
(truncation error space, small means familiar).  The mixed decision rule
maximizes ``p * pcs - (1 - p) * tes`` over speakers; ``(k_p, k_t, p)``
are tuned by exhaustive search on validation clips.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .envelope import read_envelope, write_envelope
from .errors import ArgumentError, FormatError, NumericError
from .features import FeatureMatrix

EIGENSPACE_KIND = "eigenspace"


@dataclass
class SpeakerEigenspace:
    """Mean vector, orthonormal basis, and descending eigenvalues for a speaker."""

    speaker_id: str
    mean: np.ndarray          # (dims,)
    basis: np.ndarray         # (dims, K), columns sorted by eigenvalue
    eigenvalues: np.ndarray   # (K,), descending, >= 0

    @property
    def dims(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


@dataclass
class PcaParams:
    """Mixed-classifier parameter triple."""

    k_p: int
    k_t: int
    p: float

    def validate_for(self, rank: int) -> None:
        if not 1 <= self.k_p <= rank:
            raise ArgumentError(f"k_p={self.k_p} outside [1, {rank}]")
        if not 1 <= self.k_t <= rank:
            raise ArgumentError(f"k_t={self.k_t} outside [1, {rank}]")
        if self.k_p + self.k_t > rank:
            raise ArgumentError(
                f"k_p + k_t = {self.k_p + self.k_t} exceeds basis rank {rank}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise ArgumentError(f"p={self.p} outside [0, 1]")


@dataclass
class GridPoint:
    """One maximal contiguous p-interval achieving the best rate."""

    k_p: int
    k_t: int
    p_lo: float
    p_hi: float
    total_dim: int
    n_points: int


@dataclass
class GridSearchResult:
    best_rate: float
    points: list[GridPoint]


@dataclass
class DimensionSweep:
    """Rate-vs-dimension curves for the PCS, TES, and p=0.5 mixed rules."""

    dimensions: list[int]
    pcs_rates: list[float]
    tes_rates: list[float]
    mixed_rates: list[float]


def train_eigenspace(speaker_id: str, features: FeatureMatrix) -> SpeakerEigenspace:
    """Fit a speaker eigenspace from enrollment frames.

    The mean is the per-row average over frames; the basis comes from the
    eigendecomposition of the unnormalized covariance of the mean-shifted
    frames, truncated to ``K = min(dims, frames)`` columns.  Eigenvalues
    within rounding error of zero are clamped to exactly zero.

    Raises
    ------
    ArgumentError
        Fewer than two frames.
    NumericError
        All frames identical (zero covariance), naming the speaker.
    """
    if features.frames < 2:
        raise ArgumentError(
            f"speaker {speaker_id}: need at least 2 enrollment frames, got {features.frames}"
        )
    mean = features.values.mean(axis=1)
    cov = linalg.covariance(features.values, mean)
    eig = linalg.sym_eigendecomp(cov)

    scale = max(1.0, float(np.max(np.abs(features.values))))
    degenerate_floor = (1e-10 * scale) ** 2 * features.frames
    if eig.eigenvalues[0] <= degenerate_floor:
        raise NumericError(
            f"speaker {speaker_id}: degenerate enrollment (all frames identical)"
        )

    k = min(features.dims, features.frames)
    return SpeakerEigenspace(
        speaker_id=speaker_id,
        mean=mean,
        basis=eig.eigenvectors[:, :k],
        eigenvalues=np.maximum(eig.eigenvalues[:k], 0.0),
    )


def _coordinates(model: SpeakerEigenspace, x: FeatureMatrix) -> np.ndarray:
    """Full coordinate matrix ``basis.T @ (x - mean)``, shape (K, frames).

    Always computed at full rank so per-dimension slices are bitwise
    identical wherever they are taken (single scores, tables, sweeps).
    """
    if x.dims != model.dims:
        raise ArgumentError(
            f"feature dims {x.dims} do not match model dims {model.dims}"
        )
    return model.basis.T @ (x.values - model.mean[:, None])


def _span_score(coords: np.ndarray, rows: slice) -> float:
    return float(np.sqrt((coords[rows] ** 2).sum(axis=0)).sum())


def score_pcs(model: SpeakerEigenspace, x: FeatureMatrix, k_p: int) -> float:
    """Summed per-frame coordinate norm in the leading ``k_p`` directions."""
    if not 1 <= k_p <= model.rank:
        raise ArgumentError(f"k_p={k_p} outside [1, {model.rank}]")
    return _span_score(_coordinates(model, x), slice(0, k_p))


def score_tes(model: SpeakerEigenspace, x: FeatureMatrix, k_t: int) -> float:
    """Summed per-frame coordinate norm in the trailing ``k_t`` directions."""
    if not 1 <= k_t <= model.rank:
        raise ArgumentError(f"k_t={k_t} outside [1, {model.rank}]")
    return _span_score(_coordinates(model, x), slice(model.rank - k_t, model.rank))


def classify_mixed(models: list[SpeakerEigenspace], x: FeatureMatrix,
                   params: PcaParams) -> tuple[str, np.ndarray]:
    """Mixed-rule decision: argmax of ``p * pcs - (1 - p) * tes``.

    Returns the winning speaker id and the per-speaker score vector (for
    downstream fusion).  Ties break toward the lowest speaker index.
    """
    if not models:
        raise ArgumentError("empty model list")
    dims = models[0].dims
    for m in models:
        if m.dims != dims:
            raise ArgumentError("models disagree on feature dimension")
        params.validate_for(m.rank)
    scores = np.array([
        params.p * score_pcs(m, x, params.k_p) - (1.0 - params.p) * score_tes(m, x, params.k_t)
        for m in models
    ])
    winner = int(np.argmax(scores))
    return models[winner].speaker_id, scores


def weight_grid(p_step: float) -> list[float]:
    """Evenly spaced weights covering [0, 1] inclusive at resolution ``p_step``."""
    if not 0 < p_step <= 1:
        raise ArgumentError(f"p_step must be in (0, 1], got {p_step}")
    n = int(math.floor(1.0 / p_step + 1e-9))
    grid = [i * p_step for i in range(n + 1)]
    if grid[-1] > 1.0:
        grid[-1] = 1.0
    elif grid[-1] < 1.0 - 1e-12:
        grid.append(1.0)
    return grid


def _score_tables(models: list[SpeakerEigenspace],
                  clips: list[FeatureMatrix],
                  k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """PCS and TES score tables, shape (speakers, clips, k_max + 1).

    Index ``[s, c, k]`` holds the score at dimension ``k`` (column 0 is
    unused padding so dimensions index directly).
    """
    s_count, c_count = len(models), len(clips)
    pcs = np.zeros((s_count, c_count, k_max + 1))
    tes = np.zeros((s_count, c_count, k_max + 1))
    for si, model in enumerate(models):
        for ci, clip in enumerate(clips):
            coords = _coordinates(model, clip)
            for k in range(1, k_max + 1):
                pcs[si, ci, k] = _span_score(coords, slice(0, k))
                tes[si, ci, k] = _span_score(coords, slice(model.rank - k, model.rank))
    return pcs, tes


def _check_validation(models, validation):
    if not models:
        raise ArgumentError("empty model list")
    if not validation:
        raise ArgumentError("empty validation set")
    dims = models[0].dims
    for m in models:
        if m.dims != dims:
            raise ArgumentError("models disagree on feature dimension")
    for _, clip in validation:
        if clip.dims != dims:
            raise ArgumentError("validation clip dims do not match models")


def _label_indices(models, validation) -> np.ndarray:
    order = {m.speaker_id: i for i, m in enumerate(models)}
    return np.array([order.get(label, -1) for label, _ in validation])


def grid_search(models: list[SpeakerEigenspace],
                validation: list[tuple[str, FeatureMatrix]],
                k_max: int | None = None,
                p_step: float = 0.01) -> GridSearchResult:
    """Exhaustive search over ``(k_p, k_t, p)`` on labeled validation clips.

    Every pair in ``[1, k_max]^2`` with ``k_p + k_t <= rank`` is evaluated
    at every grid weight; per-speaker scores are computed once per
    dimension and reused across all weights.  All triples achieving the
    best classification rate are reported as maximal contiguous
    p-intervals, sorted by ascending total dimension ``k_p + k_t``.
    """
    _check_validation(models, validation)
    rank = min(m.rank for m in models)
    if k_max is None:
        k_max = models[0].dims // 2
    if not 1 <= k_max <= rank:
        raise ArgumentError(f"k_max={k_max} outside [1, {rank}]")

    clips = [clip for _, clip in validation]
    labels = _label_indices(models, validation)
    pcs, tes = _score_tables(models, clips, k_max)
    grid = weight_grid(p_step)
    ps = np.array(grid)

    # rates[(k_p, k_t)] -> rate per grid weight
    rates: dict[tuple[int, int], np.ndarray] = {}
    for k_p in range(1, k_max + 1):
        for k_t in range(1, k_max + 1):
            if k_p + k_t > rank:
                continue
            g1 = pcs[:, :, k_p]
            g2 = tes[:, :, k_t]
            mixed = ps[:, None, None] * g1[None] - (1.0 - ps[:, None, None]) * g2[None]
            predicted = np.argmax(mixed, axis=1)
            rates[(k_p, k_t)] = (predicted == labels[None, :]).mean(axis=1)

    best_rate = max(float(r.max()) for r in rates.values())
    points: list[GridPoint] = []
    for (k_p, k_t), r in sorted(rates.items()):
        winners = np.flatnonzero(r == best_rate)
        if winners.size == 0:
            continue
        run_start = winners[0]
        prev = winners[0]
        for idx in list(winners[1:]) + [None]:
            if idx is not None and idx == prev + 1:
                prev = idx
                continue
            points.append(GridPoint(
                k_p=k_p, k_t=k_t,
                p_lo=grid[run_start], p_hi=grid[prev],
                total_dim=k_p + k_t,
                n_points=int(prev - run_start + 1),
            ))
            if idx is not None:
                run_start = idx
                prev = idx
    points.sort(key=lambda pt: (pt.total_dim, pt.k_p, pt.k_t, pt.p_lo))
    return GridSearchResult(best_rate=best_rate, points=points)


def dimension_sweep(models: list[SpeakerEigenspace],
                    validation: list[tuple[str, FeatureMatrix]],
                    k_max: int | None = None) -> DimensionSweep:
    """Rate curves vs dimension for pure PCS, pure TES, and the p=0.5 mix.

    The mixed curve uses ``k_p = k_t = k``, so ``k_max`` is capped at half
    the basis rank.
    """
    _check_validation(models, validation)
    rank = min(m.rank for m in models)
    if k_max is None:
        k_max = models[0].dims // 2
    k_max = min(k_max, rank // 2)
    if k_max < 1:
        raise ArgumentError("basis rank too small for a dimension sweep")

    clips = [clip for _, clip in validation]
    labels = _label_indices(models, validation)
    pcs, tes = _score_tables(models, clips, k_max)

    dims, pcs_rates, tes_rates, mixed_rates = [], [], [], []
    for k in range(1, k_max + 1):
        dims.append(k)
        pcs_rates.append(float((np.argmax(pcs[:, :, k], axis=0) == labels).mean()))
        tes_rates.append(float((np.argmin(tes[:, :, k], axis=0) == labels).mean()))
        mixed = 0.5 * pcs[:, :, k] - 0.5 * tes[:, :, k]
        mixed_rates.append(float((np.argmax(mixed, axis=0) == labels).mean()))
    return DimensionSweep(dims, pcs_rates, tes_rates, mixed_rates)


def choose_params(result: GridSearchResult) -> PcaParams:
    """Pick the operating point from a grid search: the cheapest best point,
    with the median weight of its interval."""
    if not result.points:
        raise ArgumentError("grid search returned no points")
    pt = result.points[0]
    return PcaParams(k_p=pt.k_p, k_t=pt.k_t, p=0.5 * (pt.p_lo + pt.p_hi))


def grid_to_csv(result: GridSearchResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k_p", "k_t", "p_lo", "p_hi", "total_dim", "rate"])
        for pt in result.points:
            writer.writerow([pt.k_p, pt.k_t, repr(pt.p_lo), repr(pt.p_hi),
                             pt.total_dim, repr(result.best_rate)])


def sweep_to_csv(sweep: DimensionSweep, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dimension", "pcs_rate", "tes_rate", "mixed_rate"])
        for i, k in enumerate(sweep.dimensions):
            writer.writerow([k, repr(sweep.pcs_rates[i]), repr(sweep.tes_rates[i]),
                             repr(sweep.mixed_rates[i])])


def save_eigenspace(model: SpeakerEigenspace, path) -> None:
    write_envelope(path, EIGENSPACE_KIND, {
        "mean": model.mean,
        "basis": model.basis,
        "eigenvalues": model.eigenvalues,
    }, meta={"speaker_id": model.speaker_id})


def load_eigenspace(path) -> SpeakerEigenspace:
    env = read_envelope(path, expected_kind=EIGENSPACE_KIND)
    for name in ("mean", "basis", "eigenvalues"):
        if name not in env.arrays:
            raise FormatError(f"{path}: eigenspace file missing '{name}' array")
    basis = env.arrays["basis"]
    mean = env.arrays["mean"]
    eigenvalues = env.arrays["eigenvalues"]
    if basis.ndim != 2 or mean.ndim != 1 or basis.shape[0] != mean.shape[0] \
            or eigenvalues.shape != (basis.shape[1],):
        raise FormatError(f"{path}: inconsistent eigenspace array shapes")
    return SpeakerEigenspace(
        speaker_id=str(env.meta.get("speaker_id", "unknown")),
        mean=mean, basis=basis, eigenvalues=eigenvalues,
    )
