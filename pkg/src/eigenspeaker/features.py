"""HTK-flavored MFCC frontend.

Converts mono PCM audio to 13-dimensional base features (cepstra c1..c12
plus log frame energy), then appends regression deltas and double deltas
for the standard 39-dimensional configuration: 25 ms Hamming windows at a
10 ms hop, 26 triangular mel filters on the magnitude spectrum, and an
orthonormal DCT-II with the DC coefficient dropped.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .envelope import read_envelope, write_envelope
from .errors import ArgumentError, FormatError

FEATURES_KIND = "features"


@dataclass
class FrontendConfig:
    """Feature-extraction knobs; defaults give the 13-dim base layout."""

    window_ms: float = 25.0
    hop_ms: float = 10.0
    num_mel_filters: int = 26
    num_ceps: int = 12              # DCT-II coefficients c1..c12 (c0 dropped)
    pre_emphasis: float = 0.97
    delta_window: int = 2
    include_energy: bool = True
    energy_floor: float = 1e-10     # linear-domain floor before the log
    low_freq_hz: float = 0.0
    high_freq_hz: float | None = None

    def __post_init__(self):
        if not (self.window_ms > self.hop_ms > 0):
            raise ArgumentError(
                f"need window_ms > hop_ms > 0, got {self.window_ms} / {self.hop_ms}"
            )
        if self.num_ceps < 1:
            raise ArgumentError(f"num_ceps must be >= 1, got {self.num_ceps}")
        if self.num_mel_filters < self.num_ceps + 1:
            raise ArgumentError("need more mel filters than retained cepstra")
        if self.delta_window < 1:
            raise ArgumentError(f"delta_window must be >= 1, got {self.delta_window}")
        if not 0 <= self.pre_emphasis < 1:
            raise ArgumentError(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")
        if self.energy_floor <= 0:
            raise ArgumentError("energy_floor must be positive")


@dataclass
class AudioClip:
    """Mono audio with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ArgumentError("samples must be a nonempty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ArgumentError("samples contain non-finite values")
        if np.max(np.abs(self.samples)) > 1.0:
            raise ArgumentError("samples must lie in [-1, 1]")
        if self.sample_rate < 8000:
            raise ArgumentError(f"sample_rate must be >= 8000 Hz, got {self.sample_rate}")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class FeatureMatrix:
    """Column-per-frame feature matrix with frontend metadata.

    ``values`` is an (dims x frames) float64 array, made read-only after
    construction so cached score tables can trust it.
    """

    values: np.ndarray
    frame_rate_ms: float = 10.0
    window_ms: float = 25.0
    feature_kind: str = "mfcc"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ArgumentError(f"feature values must be a nonempty 2-D matrix, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("feature values contain non-finite entries")
        arr.setflags(write=False)
        self.values = arr

    @property
    def dims(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray, feature_kind: str | None = None) -> "FeatureMatrix":
        return FeatureMatrix(
            values=values,
            frame_rate_ms=self.frame_rate_ms,
            window_ms=self.window_ms,
            feature_kind=self.feature_kind if feature_kind is None else feature_kind,
        )


def read_wav(path) -> AudioClip:
    """Read a mono 16-bit PCM WAV file; anything else is rejected."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getcomptype() != "NONE":
                raise FormatError(f"{path}: compressed WAV ({fh.getcomptype()}) not supported")
            if fh.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono audio, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise FormatError(
                    f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit samples"
                )
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: not a valid WAV file: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioClip(samples=samples, sample_rate=rate)


def frame_count(n_samples: int, sample_rate: int, cfg: FrontendConfig) -> int:
    """Number of full analysis windows: ``1 + (n - win) // hop``, no padding."""
    win = int(round(cfg.window_ms * sample_rate / 1000.0))
    hop = int(round(cfg.hop_ms * sample_rate / 1000.0))
    if n_samples < win:
        raise ArgumentError(
            f"clip of {n_samples} samples is shorter than one {win}-sample window"
        )
    return 1 + (n_samples - win) // hop


def mel_filterbank(num_filters: int, nfft: int, sample_rate: int,
                   low_hz: float = 0.0, high_hz: float | None = None) -> np.ndarray:
    """Triangular mel filterbank over rfft bins, shape (num_filters, nfft//2 + 1)."""
    high_hz = high_hz if high_hz is not None else sample_rate / 2.0
    if not 0 <= low_hz < high_hz <= sample_rate / 2.0:
        raise ArgumentError(f"bad filterbank band [{low_hz}, {high_hz}] at rate {sample_rate}")

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    points = np.linspace(to_mel(low_hz), to_mel(high_hz), num_filters + 2)
    bins = np.floor((nfft + 1) * from_mel(points) / sample_rate).astype(int)
    bank = np.zeros((num_filters, nfft // 2 + 1))
    for j in range(num_filters):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        for i in range(left, center):
            bank[j, i] = (i - left) / max(center - left, 1)
        for i in range(center, right):
            bank[j, i] = (right - i) / max(right - center, 1)
    return bank


def extract_mfcc(clip: AudioClip, cfg: FrontendConfig | None = None) -> FeatureMatrix:
    """Base cepstral features from audio: c1..c{num_ceps} plus log energy.

    Per frame: pre-emphasis, Hamming window, magnitude spectrum, mel
    filterbank, log, orthonormal DCT-II.  The DC coefficient c0 is
    dropped; log frame energy is appended as the last row instead.

    Raises
    ------
    ArgumentError
        Clip shorter than one analysis window.
    """
    cfg = cfg or FrontendConfig()
    sr = clip.sample_rate
    win = int(round(cfg.window_ms * sr / 1000.0))
    hop = int(round(cfg.hop_ms * sr / 1000.0))
    n = clip.samples.size
    n_frames = frame_count(n, sr, cfg)

    emphasized = np.concatenate((
        clip.samples[:1],
        clip.samples[1:] - cfg.pre_emphasis * clip.samples[:-1],
    ))
    frames = np.lib.stride_tricks.sliding_window_view(emphasized, win)[::hop][:n_frames]
    windowed = frames * np.hamming(win)

    energy = np.log(np.maximum(np.sum(windowed ** 2, axis=1), cfg.energy_floor))

    nfft = 1 << (win - 1).bit_length()
    magnitude = np.abs(np.fft.rfft(windowed, n=nfft, axis=1))
    bank = mel_filterbank(cfg.num_mel_filters, nfft, sr, cfg.low_freq_hz, cfg.high_freq_hz)
    filter_energies = np.maximum(magnitude @ bank.T, cfg.energy_floor)
    cepstra = scipy.fft.dct(np.log(filter_energies), type=2, norm="ortho", axis=1)
    kept = cepstra[:, 1:1 + cfg.num_ceps]

    rows = [kept.T]
    if cfg.include_energy:
        rows.append(energy[None, :])
    return FeatureMatrix(
        values=np.vstack(rows),
        frame_rate_ms=cfg.hop_ms,
        window_ms=cfg.window_ms,
        feature_kind="mfcc",
    )


def _regression_delta(values: np.ndarray, half_window: int) -> np.ndarray:
    padded = np.pad(values, ((0, 0), (half_window, half_window)), mode="edge")
    t = values.shape[1]
    out = np.zeros_like(values)
    for j in range(1, half_window + 1):
        out += j * (padded[:, half_window + j:half_window + j + t]
                    - padded[:, half_window - j:half_window - j + t])
    return out / (2.0 * sum(j * j for j in range(1, half_window + 1)))


def append_deltas(features: FeatureMatrix, cfg: FrontendConfig | None = None) -> FeatureMatrix:
    """Stack delta and double-delta rows under the base rows (13 -> 39 dims).

    Deltas are the standard +/- ``delta_window`` regression slope with the
    first and last frames replicated at the edges; double deltas apply the
    same operator to the delta rows.

    Raises
    ------
    ArgumentError
        Fewer frames than one full regression window, or deltas already
        present.
    """
    cfg = cfg or FrontendConfig()
    j = cfg.delta_window
    if features.frames < 2 * j + 1:
        raise ArgumentError(
            f"need at least {2 * j + 1} frames for delta window +/-{j}, got {features.frames}"
        )
    if "+d" in features.feature_kind:
        raise ArgumentError(f"features of kind '{features.feature_kind}' already carry deltas")
    delta = _regression_delta(features.values, j)
    double = _regression_delta(delta, j)
    return features.with_values(
        np.vstack([features.values, delta, double]),
        feature_kind=features.feature_kind + "+d+dd",
    )


def extract_full(clip: AudioClip, cfg: FrontendConfig | None = None) -> FeatureMatrix:
    """Base features plus deltas and double deltas (39 rows at defaults)."""
    cfg = cfg or FrontendConfig()
    return append_deltas(extract_mfcc(clip, cfg), cfg)


def save_features(features: FeatureMatrix, path) -> None:
    write_envelope(path, FEATURES_KIND, {"values": features.values}, meta={
        "frame_rate_ms": features.frame_rate_ms,
        "window_ms": features.window_ms,
        "feature_kind": features.feature_kind,
    })


def load_features(path) -> FeatureMatrix:
    env = read_envelope(path, expected_kind=FEATURES_KIND)
    if "values" not in env.arrays:
        raise FormatError(f"{path}: feature file missing 'values' array")
    values = env.arrays["values"]
    if values.ndim != 2:
        raise FormatError(f"{path}: feature values must be 2-D, got ndim={values.ndim}")
    return FeatureMatrix(
        values=values,
        frame_rate_ms=float(env.meta.get("frame_rate_ms", 10.0)),
        window_ms=float(env.meta.get("window_ms", 25.0)),
        feature_kind=str(env.meta.get("feature_kind", "unknown")),
    )


def export_csv(features: FeatureMatrix, path) -> None:
    """Debug export: one frame per line, dims as columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for t in range(features.frames):
            writer.writerow([repr(v) for v in features.values[:, t]])
