"""Handcrafted window features: time-domain statistics, DFT band powers,
and Stockwell-transform band statistics.

Conventions, fixed so the feature set is reproducible:

* standard deviations are population (divide by d);
* zero-crossings count strict sign changes; an exact zero carries the
  previous sample's sign;
* Pearson correlation of a constant channel is 0;
* DFT bins are assigned to bands by their folded frequency
  min(k, d-k) * rate / d; membership is low <= f < high, except that a
  band whose upper edge equals the Nyquist frequency also includes the
  Nyquist bin, so bands ending at rate/2 cover every bin;
* the Stockwell transform uses the normalized DFT H[n] = FFT[n]/N, so
  the time average (1/N) * sum_tau S[n, tau] equals H[n] for every
  voice, including the constant voice 0 (the signal mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .pipeline import WindowedDataset

# Band edges (Hz) for the 90 Hz configuration.
DEFAULT_BAND_EDGES = (0.1, 1.0, 3.0, 6.0, 10.0, 20.0, 45.0)


@dataclass
class FeatureMatrix:
    values: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_names):
            raise ValidationError(
                f"feature matrix shape {self.values.shape} does not match {len(self.feature_names)} names"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValidationError("feature names must be unique")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValidationError("feature matrix contains non-finite entries")


def _zero_crossings(x: np.ndarray) -> int:
    s = np.sign(x)
    nonzero = s != 0
    if not nonzero.any():
        return 0
    idx = np.where(nonzero, np.arange(len(s)), -1)
    last = np.maximum.accumulate(idx)
    carried = np.where(last >= 0, s[np.maximum(last, 0)], 0.0)
    carried = carried[carried != 0]
    return int(np.count_nonzero(carried[1:] != carried[:-1]))


def time_domain_features(window: np.ndarray) -> np.ndarray:
    """Per channel: mean, population std, zero-crossings, energy; then
    Pearson correlation for every unordered channel pair (i < j)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] < 2:
        raise ValidationError("window must be (c, d) with d >= 2")
    c, d = window.shape
    mean = window.mean(axis=1)
    std = window.std(axis=1)
    energy = (window**2).sum(axis=1)
    zcr = np.array([_zero_crossings(row) for row in window], dtype=np.float64)

    stats = np.column_stack([mean, std, zcr, energy]).ravel()

    centered = window - mean[:, None]
    corrs = []
    for i in range(c):
        for j in range(i + 1, c):
            denom = std[i] * std[j]
            if denom == 0:
                corrs.append(0.0)
            else:
                corrs.append(float(centered[i] @ centered[j] / (d * denom)))
    return np.concatenate([stats, np.asarray(corrs)])


def _band_bin_mask(freqs: np.ndarray, low: float, high: float, nyquist: float) -> np.ndarray:
    mask = (freqs >= low) & (freqs < high)
    if high == nyquist:
        mask |= freqs == nyquist
    return mask


def _check_band_edges(band_edges, rate_hz):
    edges = [float(e) for e in band_edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError(f"band edges must be strictly increasing, got {band_edges}")
    if edges[0] < 0 or edges[-1] > rate_hz / 2:
        raise ValidationError(f"band edges must lie within [0, {rate_hz / 2}], got {band_edges}")
    return edges


def dft_band_powers(window: np.ndarray, rate_hz: float, band_edges_hz=DEFAULT_BAND_EDGES) -> np.ndarray:
    """Per channel, per band: sum of |DFT|^2 / d over bins in the band.

    Bands summed over a full bin cover reproduce the total power
    sum|DFT|^2 / d exactly (Parseval).
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ValidationError("window must be (c, d)")
    edges = _check_band_edges(band_edges_hz, rate_hz)
    c, d = window.shape
    spectrum = np.abs(np.fft.fft(window, axis=1)) ** 2 / d
    k = np.arange(d)
    folded = np.minimum(k, d - k) * rate_hz / d
    out = np.empty((c, len(edges) - 1))
    for b, (low, high) in enumerate(zip(edges, edges[1:])):
        mask = _band_bin_mask(folded, low, high, rate_hz / 2)
        out[:, b] = spectrum[:, mask].sum(axis=1)
    return out.ravel()


def stockwell_transform(signal: np.ndarray) -> np.ndarray:
    """Discrete Stockwell transform, shape (floor(N/2) + 1, N).

    Row n (voice n, frequency n/N cycles per sample) is computed in the
    frequency domain as S[n, tau] = sum_m H[(m + n) mod N] g_n(m)
    exp(2 pi i m tau / N) with H the normalized DFT and g_n the
    periodized Gaussian exp(-2 pi^2 m^2 / n^2).  Voice 0 is the signal
    mean by convention.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.shape[0] < 2:
        raise ValidationError("stockwell_transform needs a 1-D signal of length >= 2")
    n_samples = signal.shape[0]
    n_voices = n_samples // 2 + 1
    spectrum = np.fft.fft(signal) / n_samples
    out = np.empty((n_voices, n_samples), dtype=np.complex128)
    out[0, :] = signal.mean()
    m = np.arange(n_samples, dtype=np.float64)
    for voice in range(1, n_voices):
        gauss = np.exp(-2.0 * np.pi**2 * m**2 / voice**2) + np.exp(
            -2.0 * np.pi**2 * (m - n_samples) ** 2 / voice**2
        )
        shifted = np.roll(spectrum, -voice)
        out[voice, :] = np.fft.ifft(shifted * gauss) * n_samples
    return out


def stockwell_features(window: np.ndarray, rate_hz: float, band_edges_hz=DEFAULT_BAND_EDGES) -> np.ndarray:
    """Per channel, per band: mean and population std over time of the
    voice-averaged |S|.  Bands containing no voice yield (0, 0)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] < 2:
        raise ValidationError("window must be (c, d) with d >= 2")
    edges = _check_band_edges(band_edges_hz, rate_hz)
    c, d = window.shape
    voice_freqs = np.arange(d // 2 + 1) * rate_hz / d
    out = np.zeros((c, (len(edges) - 1) * 2))
    for ch in range(c):
        magnitude = np.abs(stockwell_transform(window[ch]))
        for b, (low, high) in enumerate(zip(edges, edges[1:])):
            mask = _band_bin_mask(voice_freqs, low, high, rate_hz / 2)
            if mask.any():
                band_over_time = magnitude[mask].mean(axis=0)
                out[ch, 2 * b] = band_over_time.mean()
                out[ch, 2 * b + 1] = band_over_time.std()
    return out.ravel()


def _band_labels(band_edges) -> list[str]:
    return [f"{low:g}_{high:g}" for low, high in zip(band_edges, band_edges[1:])]


def feature_names(c: int, band_edges=DEFAULT_BAND_EDGES) -> list[str]:
    """Names matching extract_baseline_features' column order."""
    names = []
    for i in range(c):
        names += [f"ch{i}_mean", f"ch{i}_std", f"ch{i}_zcr", f"ch{i}_energy"]
    for i in range(c):
        for j in range(i + 1, c):
            names.append(f"corr_ch{i}_ch{j}")
    bands = _band_labels(band_edges)
    for i in range(c):
        names += [f"ch{i}_power_{b}" for b in bands]
    for i in range(c):
        for b in bands:
            names += [f"ch{i}_st_{b}_mean", f"ch{i}_st_{b}_std"]
    return names


def extract_baseline_features(ds: WindowedDataset, band_edges_hz=DEFAULT_BAND_EDGES) -> FeatureMatrix:
    """Concatenated time, frequency, and Stockwell features per window.

    For c = 9 channels and 6 bands this yields 9*4 + 36 + 9*6 + 9*12 =
    234 columns, in the fixed order given by :func:`feature_names`.
    """
    c = ds.X.shape[1]
    names = feature_names(c, band_edges_hz)
    rows = np.empty((ds.n_windows, len(names)))
    for i in range(ds.n_windows):
        window = ds.X[i]
        rows[i] = np.concatenate(
            [
                time_domain_features(window),
                dft_band_powers(window, ds.sample_rate_hz, band_edges_hz),
                stockwell_features(window, ds.sample_rate_hz, band_edges_hz),
            ]
        )
    return FeatureMatrix(values=rows, feature_names=names)
