"""Signal preprocessing: resampling, high-pass filtering, windowing,
class balancing, and ZCA whitening.

The model-ready tensor is built in four steps: resample every channel to
a common rate (90 Hz by default), remove the DC component with a 0.1 Hz
first-order high-pass, cut 1 s windows (90 samples) sliding by 10, and
whiten the flattened windows with a ZCA transform fitted on training
data only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .errors import ValidationError
from .recordings import RawRecording

TARGET_RATE_HZ = 90.0
HIGHPASS_CUTOFF_HZ = 0.1
WINDOW_LEN = 90
WINDOW_STEP = 10


@dataclass
class WindowedDataset:
    """Windows ready for modelling.

    ``X`` has shape (n, c, d) with channels sensor-major, axis-minor.
    ``y`` is +1 for SMM windows and -1 otherwise.  ``window_origin``
    keeps (recording id, start index) per window so every window can be
    traced to a contiguous slice of its source recording.
    """

    X: np.ndarray
    y: np.ndarray
    subject_ids: np.ndarray
    window_origin: list[tuple[str, int]]
    sample_rate_hz: float = TARGET_RATE_HZ

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.subject_ids = np.asarray(self.subject_ids)
        if self.X.ndim != 3:
            raise ValidationError(f"X must be (n, c, d), got shape {self.X.shape}")
        n = self.X.shape[0]
        if not (self.y.shape == (n,) and self.subject_ids.shape == (n,) and len(self.window_origin) == n):
            raise ValidationError("X, y, subject_ids and window_origin must agree in length")
        if n and not np.all(np.isin(self.y, (-1, 1))):
            raise ValidationError("labels must be -1 or +1")

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]

    def subset(self, indices) -> "WindowedDataset":
        indices = np.asarray(indices)
        return WindowedDataset(
            X=self.X[indices],
            y=self.y[indices],
            subject_ids=self.subject_ids[indices],
            window_origin=[self.window_origin[int(i)] for i in indices],
            sample_rate_hz=self.sample_rate_hz,
        )


def concat_datasets(parts: list[WindowedDataset]) -> WindowedDataset:
    if not parts:
        raise ValidationError("cannot concatenate zero datasets")
    rates = {p.sample_rate_hz for p in parts}
    if len(rates) != 1:
        raise ValidationError(f"mixed sample rates in concatenation: {rates}")
    return WindowedDataset(
        X=np.concatenate([p.X for p in parts], axis=0),
        y=np.concatenate([p.y for p in parts]),
        subject_ids=np.concatenate([p.subject_ids for p in parts]),
        window_origin=[o for p in parts for o in p.window_origin],
        sample_rate_hz=parts[0].sample_rate_hz,
    )


def resample_linear(stream, from_hz: float, to_hz: float) -> np.ndarray:
    """Linearly resample a 1-D stream from ``from_hz`` to ``to_hz``.

    The stream is treated as covering n/from_hz seconds, so the output
    has floor(n * to_hz / from_hz) samples at times j/to_hz.  Query
    times past the final input sample (at most one input period at the
    tail) take the final sample's value; there is no extrapolation.
    """
    stream = np.asarray(stream, dtype=np.float64)
    if stream.ndim != 1 or stream.shape[0] < 2:
        raise ValidationError("resample_linear needs a 1-D stream of length >= 2")
    if not (from_hz > 0 and to_hz > 0):
        raise ValidationError("sampling rates must be positive")
    if from_hz == to_hz:
        return stream.copy()
    n = stream.shape[0]
    m = int(np.floor(n * to_hz / from_hz))
    t_out = np.arange(m) / to_hz
    t_in = np.arange(n) / from_hz
    return np.interp(t_out, t_in, stream)


def highpass_coefficients(cutoff_hz: float, rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """First-order high-pass coefficients (b, a), bilinear transform of
    the analog prototype s / (s + 2*pi*cutoff)."""
    if not (0 < cutoff_hz < rate_hz / 2):
        raise ValidationError(f"cutoff must satisfy 0 < cutoff < rate/2, got {cutoff_hz} at {rate_hz} Hz")
    wc = 2.0 * np.pi * cutoff_hz
    c = 2.0 * rate_hz
    b = np.array([c, -c]) / (c + wc)
    a = np.array([1.0, (wc - c) / (c + wc)])
    return b, a


def highpass_filter(stream, cutoff_hz: float, rate_hz: float) -> np.ndarray:
    """Forward-only first-order IIR high-pass with zero initial state.

    DC gain is exactly 0; gain at 50x the cutoff exceeds 0.99.
    """
    b, a = highpass_coefficients(cutoff_hz, rate_hz)
    stream = np.asarray(stream, dtype=np.float64)
    return scipy.signal.lfilter(b, a, stream)


def preprocess_recording(
    rec: RawRecording,
    target_rate_hz: float = TARGET_RATE_HZ,
    cutoff_hz: float = HIGHPASS_CUTOFF_HZ,
) -> RawRecording:
    """Resample every channel to ``target_rate_hz`` and high-pass it.

    Annotation indices are rescaled by the rate ratio.
    """
    ratio = target_rate_hz / rec.sample_rate_hz
    if rec.sample_rate_hz == target_rate_hz:
        sensors = rec.sensors.copy()
        n_new = rec.n_samples
    else:
        n_new = int(np.floor(rec.n_samples * ratio))
        sensors = np.empty((rec.n_sensors, n_new, 3))
        for i in range(rec.n_sensors):
            for ax in range(3):
                sensors[i, :, ax] = resample_linear(
                    rec.sensors[i, :, ax], rec.sample_rate_hz, target_rate_hz
                )
    for i in range(rec.n_sensors):
        for ax in range(3):
            sensors[i, :, ax] = highpass_filter(sensors[i, :, ax], cutoff_hz, target_rate_hz)
    annotations = []
    for start, end, label in rec.annotations:
        s = min(int(round(start * ratio)), n_new)
        e = min(int(round(end * ratio)), n_new)
        if e > s:
            annotations.append((s, e, label))
    return RawRecording(
        subject_id=rec.subject_id,
        study_id=rec.study_id,
        sample_rate_hz=target_rate_hz,
        sensors=sensors,
        annotations=annotations,
    )


def segment_windows(
    rec: RawRecording,
    window_len: int = WINDOW_LEN,
    step: int = WINDOW_STEP,
    smm_fraction_threshold: float = 0.5,
) -> WindowedDataset:
    """Cut sliding windows from one recording.

    Windows start at 0, step, 2*step, ... while start + window_len <= n_t,
    giving floor((n_t - window_len)/step) + 1 windows.  A window is
    labelled +1 iff at least ``smm_fraction_threshold`` of its samples
    fall inside SMM annotations.
    """
    if rec.n_samples < window_len:
        raise ValidationError(
            f"recording {rec.subject_id!r} has {rec.n_samples} samples, shorter than one window ({window_len})"
        )
    channels = rec.channels()
    mask = rec.smm_mask().astype(np.float64)
    starts = np.arange(0, rec.n_samples - window_len + 1, step)
    X = np.stack([channels[:, s : s + window_len] for s in starts], axis=0)
    frac = np.array([mask[s : s + window_len].mean() for s in starts])
    y = np.where(frac >= smm_fraction_threshold, 1, -1)
    return WindowedDataset(
        X=X,
        y=y,
        subject_ids=np.array([rec.subject_id] * len(starts)),
        window_origin=[(rec.subject_id, int(s)) for s in starts],
        sample_rate_hz=rec.sample_rate_hz,
    )


def segment_recordings(
    recordings: list[RawRecording],
    window_len: int = WINDOW_LEN,
    step: int = WINDOW_STEP,
    smm_fraction_threshold: float = 0.5,
) -> WindowedDataset:
    return concat_datasets(
        [segment_windows(r, window_len, step, smm_fraction_threshold) for r in recordings]
    )


def balance_indices(y: np.ndarray, seed: int) -> np.ndarray:
    """Indices of a class-balanced subset of ``y``, in original order.

    The majority class is down-sampled uniformly without replacement to
    the minority count, deterministic in ``seed``.
    """
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("both classes must be present to balance")
    if len(pos) == len(neg):
        return np.arange(len(y))
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    kept = rng.choice(majority, size=len(minority), replace=False)
    return np.sort(np.concatenate([minority, kept]))


def balance_classes(ds: WindowedDataset, seed: int) -> WindowedDataset:
    """Down-sample the majority class to the minority count; window
    order is preserved and the minority class is untouched."""
    return ds.subset(balance_indices(ds.y, seed))


@dataclass
class ZcaTransform:
    """Mean vector and symmetric whitening matrix over flattened windows."""

    mean: np.ndarray
    whitening_matrix: np.ndarray
    epsilon: float

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.whitening_matrix = np.asarray(self.whitening_matrix, dtype=np.float64)
        k = self.mean.shape[0]
        if self.whitening_matrix.shape != (k, k):
            raise ValidationError(
                f"whitening matrix shape {self.whitening_matrix.shape} does not match mean length {k}"
            )


def fit_zca(X_train: np.ndarray, epsilon: float = 1e-5) -> ZcaTransform:
    """Fit ZCA whitening on training windows (n, c, d) or vectors (n, k).

    Uses the eigendecomposition of the sample covariance (normalized by
    n): W = U diag((lambda + eps)^(-1/2)) U^T.  After whitening the
    fitting data, covariance eigenvalues become lambda/(lambda + eps),
    so with eps much smaller than the smallest significant eigenvalue
    the whitened covariance is the identity to that relative accuracy.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    n = X_train.shape[0]
    if n < 2:
        raise ValidationError("fit_zca needs at least 2 windows")
    flat = X_train.reshape(n, -1)
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    scale = 1.0 / np.sqrt(eigvals + epsilon)
    whitening = (eigvecs * scale) @ eigvecs.T
    return ZcaTransform(mean=mean, whitening_matrix=whitening, epsilon=epsilon)


def apply_zca(transform: ZcaTransform, X: np.ndarray) -> np.ndarray:
    """Whiten windows with a fitted transform; never refits.

    Accepts (n, c, d) or (n, k) input and returns the same shape.
    """
    X = np.asarray(X, dtype=np.float64)
    shape = X.shape
    flat = X.reshape(shape[0], -1)
    if flat.shape[1] != transform.mean.shape[0]:
        raise ValidationError(
            f"feature dimension {flat.shape[1]} does not match fitted transform ({transform.mean.shape[0]})"
        )
    whitened = (flat - transform.mean) @ transform.whitening_matrix
    return whitened.reshape(shape)
