"""Raw accelerometer recordings: loading, writing, and synthetic generation.

Disk layout is deliberately plain so datasets stay diffable:

* a JSON manifest listing one entry per recording (subject, study,
  sample rate, per-sensor CSV paths, annotation CSV path); relative
  paths are resolved against the manifest's directory;
* sensor CSVs with header ``t,x,y,z`` (``t`` in seconds, strictly
  increasing);
* annotation CSVs with header ``start,end,label`` holding half-open
  sample-index intervals labelled ``SMM`` or ``NoSMM``.

Sensor order follows the manifest; the writing convention is torso,
left wrist, right wrist.  Any fixed order works, this one is just the
documented default.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .seeding import rng_from

STUDY_IDS = ("study1", "study2")
SENSOR_NAMES = ("torso", "left", "right")
SMM_LABEL = "SMM"
NOSMM_LABEL = "NoSMM"


@dataclass
class RawRecording:
    """One subject/session: ``sensors`` has shape (s, n_t, 3) with axes
    x, y, z; ``annotations`` are half-open (start, end, label) sample
    intervals."""

    subject_id: str
    study_id: str
    sample_rate_hz: float
    sensors: np.ndarray
    annotations: list[tuple[int, int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.sensors = np.asarray(self.sensors, dtype=np.float64)
        if self.study_id not in STUDY_IDS:
            raise ValidationError(
                f"recording {self.subject_id!r}: study_id must be one of {STUDY_IDS}, got {self.study_id!r}"
            )
        if not self.sample_rate_hz > 0:
            raise ValidationError(f"recording {self.subject_id!r}: sample_rate_hz must be positive")
        if self.sensors.ndim != 3 or self.sensors.shape[0] < 1 or self.sensors.shape[2] != 3:
            raise ValidationError(
                f"recording {self.subject_id!r}: sensors must have shape (s, n_t, 3), got {self.sensors.shape}"
            )
        self.annotations = [(int(a), int(b), str(lab)) for a, b, lab in self.annotations]
        _check_annotations(self.annotations, self.n_samples, self.subject_id)

    @property
    def n_sensors(self) -> int:
        return self.sensors.shape[0]

    @property
    def n_samples(self) -> int:
        return self.sensors.shape[1]

    def channels(self) -> np.ndarray:
        """Sensor-major, axis-minor channel matrix of shape (s*3, n_t)."""
        s, n_t, _ = self.sensors.shape
        return self.sensors.transpose(0, 2, 1).reshape(s * 3, n_t)

    def smm_mask(self) -> np.ndarray:
        """Boolean per-sample mask, True inside SMM-labelled intervals."""
        mask = np.zeros(self.n_samples, dtype=bool)
        for start, end, label in self.annotations:
            if label == SMM_LABEL:
                mask[start:end] = True
        return mask


def _check_annotations(annotations, n_samples, subject_id):
    for start, end, label in annotations:
        if label not in (SMM_LABEL, NOSMM_LABEL):
            raise ValidationError(
                f"recording {subject_id!r}: annotation label must be SMM or NoSMM, got {label!r}"
            )
        if not (0 <= start < end <= n_samples):
            raise ValidationError(
                f"recording {subject_id!r}: annotation interval ({start}, {end}) out of bounds for n_t={n_samples}"
            )
    ordered = sorted(annotations, key=lambda a: a[0])
    for (s1, e1, _), (s2, e2, _) in zip(ordered, ordered[1:]):
        if s2 < e1:
            raise ValidationError(
                f"recording {subject_id!r}: overlapping intervals ({s1}, {e1}) and ({s2}, {e2})"
            )


@dataclass
class SynthConfig:
    """Configuration for the synthetic multi-subject generator.

    SMM episodes are sinusoidal bursts (body-rocking-like periodicity,
    1-3 Hz by default) added on top of Gaussian noise.  Bursts always
    hit all three torso channels plus a subject-specific subset of
    wrist channels; frequency and amplitude get a per-subject fractional
    perturbation of ``per_subject_jitter``.
    """

    n_subjects: int = 6
    duration_s: float = 120.0
    sample_rate_hz: float = 90.0
    smm_burst_rate: float = 4.0  # bursts per minute
    burst_freq_range_hz: tuple[float, float] = (1.0, 3.0)
    burst_amplitude: float = 1.0
    noise_std: float = 0.5
    per_subject_jitter: float = 0.1
    burst_duration_range_s: tuple[float, float] = (2.0, 5.0)
    seed: int = 7
    study_id: str = "study1"

    def validate(self):
        lo, hi = self.burst_freq_range_hz
        if self.n_subjects < 1:
            raise ValidationError("n_subjects must be >= 1")
        if not (self.duration_s > 0 and self.sample_rate_hz > 0):
            raise ValidationError("duration_s and sample_rate_hz must be positive")
        if not (0 < lo < hi < self.sample_rate_hz / 2):
            raise ValidationError(
                f"burst_freq_range_hz must satisfy 0 < low < high < rate/2, got {self.burst_freq_range_hz}"
            )
        if self.burst_amplitude <= 0 or self.noise_std <= 0:
            raise ValidationError("burst_amplitude and noise_std must be positive")
        if self.smm_burst_rate < 0 or self.per_subject_jitter < 0:
            raise ValidationError("smm_burst_rate and per_subject_jitter must be non-negative")
        dlo, dhi = self.burst_duration_range_s
        if not (0 < dlo <= dhi):
            raise ValidationError("burst_duration_range_s must satisfy 0 < low <= high")
        if self.study_id not in STUDY_IDS:
            raise ValidationError(f"study_id must be one of {STUDY_IDS}")


def synth_generate(cfg: SynthConfig) -> list[RawRecording]:
    """Generate ``cfg.n_subjects`` recordings, deterministic in ``cfg.seed``.

    Each subject gets 3 sensors x 3 axes of N(0, noise_std^2) noise.
    Burst count per subject is round(rate * minutes); bursts are placed
    without overlap (1 s spacing) and annotated exactly.
    """
    cfg.validate()
    n_t = int(round(cfg.duration_s * cfg.sample_rate_hz))
    recordings = []
    for subj in range(cfg.n_subjects):
        rng = rng_from(cfg.seed, subj)
        sensors = rng.normal(0.0, cfg.noise_std, size=(3, n_t, 3))

        flo, fhi = cfg.burst_freq_range_hz
        subj_freq = rng.uniform(flo, fhi)
        subj_amp = cfg.burst_amplitude * (1.0 + cfg.per_subject_jitter * rng.uniform(-1.0, 1.0))
        subj_amp = max(subj_amp, 0.1 * cfg.burst_amplitude)
        # torso channels 0-2 always move; wrists vary per subject
        n_wrist = int(rng.integers(1, 4))
        wrist = rng.choice(np.arange(3, 9), size=n_wrist, replace=False)
        burst_channels = sorted([0, 1, 2] + list(int(w) for w in wrist))

        n_bursts = int(round(cfg.smm_burst_rate * cfg.duration_s / 60.0))
        intervals: list[tuple[float, float]] = []
        for _ in range(n_bursts):
            dur = rng.uniform(*cfg.burst_duration_range_s)
            if dur >= cfg.duration_s:
                continue
            for _attempt in range(200):
                start = rng.uniform(0.0, cfg.duration_s - dur)
                if all(start + dur + 1.0 <= s or start >= s + d + 1.0 for s, d in intervals):
                    intervals.append((start, dur))
                    break
        intervals.sort()

        annotations = []
        t = np.arange(n_t) / cfg.sample_rate_hz
        for start, dur in intervals:
            i0 = int(round(start * cfg.sample_rate_hz))
            i1 = min(int(round((start + dur) * cfg.sample_rate_hz)), n_t)
            if i1 <= i0:
                continue
            freq = subj_freq * (1.0 + cfg.per_subject_jitter * rng.uniform(-1.0, 1.0))
            freq = min(max(freq, flo), fhi)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            wave = subj_amp * np.sin(2.0 * math.pi * freq * t[i0:i1] + phase)
            for ch in burst_channels:
                sensors[ch // 3, i0:i1, ch % 3] += wave
            annotations.append((i0, i1, SMM_LABEL))

        recordings.append(
            RawRecording(
                subject_id=f"subj{subj + 1}",
                study_id=cfg.study_id,
                sample_rate_hz=cfg.sample_rate_hz,
                sensors=sensors,
                annotations=annotations,
            )
        )
    return recordings


def load_recordings(manifest_path) -> list[RawRecording]:
    """Load recordings listed in a JSON manifest.

    Raises FileNotFoundError for missing files and ValidationError for
    malformed CSVs, sensor length mismatches, or bad annotations.
    Every CSV row is parsed; nothing is silently skipped.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base = manifest_path.parent
    entries = manifest.get("recordings")
    if not isinstance(entries, list) or not entries:
        raise ValidationError(f"manifest {manifest_path}: missing or empty 'recordings' list")

    recordings = []
    for entry in entries:
        try:
            subject_id = entry["subject_id"]
            study_id = entry["study_id"]
            rate = float(entry["sample_rate_hz"])
            sensor_paths = entry["sensor_csvs"]
            ann_path = entry["annotation_csv"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"manifest {manifest_path}: malformed recording entry: {exc}") from exc

        streams = [_read_sensor_csv(base / p) for p in sensor_paths]
        lengths = {s.shape[0] for s in streams}
        if len(lengths) != 1:
            raise ValidationError(
                f"recording {subject_id!r}: length mismatch across sensor streams "
                f"({[s.shape[0] for s in streams]})"
            )
        sensors = np.stack(streams, axis=0)
        annotations = _read_annotation_csv(base / ann_path, subject_id)
        recordings.append(
            RawRecording(
                subject_id=subject_id,
                study_id=study_id,
                sample_rate_hz=rate,
                sensors=sensors,
                annotations=annotations,
            )
        )
    return recordings


def _read_sensor_csv(path: Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "x", "y", "z"]:
            raise ValidationError(f"{path}: expected header t,x,y,z, got {header}")
        ts, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
            ts.append(vals[0])
            rows.append(vals[1:])
    if len(rows) < 1:
        raise ValidationError(f"{path}: no samples")
    ts = np.asarray(ts)
    if np.any(np.diff(ts) <= 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 2
        raise ValidationError(f"{path}:{bad}: time column must be strictly increasing")
    return np.asarray(rows, dtype=np.float64)


def _read_annotation_csv(path: Path, subject_id: str) -> list[tuple[int, int, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["start", "end", "label"]:
            raise ValidationError(f"{path}: expected header start,end,label, got {header}")
        annotations = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                start, end = int(row[0]), int(row[1])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-integer interval ({exc})") from exc
            annotations.append((start, end, row[2]))
    return annotations


def write_recordings(recordings: list[RawRecording], out_dir) -> Path:
    """Write manifest + CSVs under ``out_dir``; returns the manifest path.

    Float values are written with full ``repr`` precision so a
    write/load round trip is exact and re-runs are byte-identical.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in recordings:
        sensor_csvs = []
        t = np.arange(rec.n_samples) / rec.sample_rate_hz
        for i in range(rec.n_sensors):
            name = SENSOR_NAMES[i] if i < len(SENSOR_NAMES) else f"sensor{i}"
            fname = f"{rec.subject_id}_{name}.csv"
            with open(out_dir / fname, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t", "x", "y", "z"])
                for j in range(rec.n_samples):
                    writer.writerow(
                        [repr(float(t[j]))] + [repr(float(v)) for v in rec.sensors[i, j]]
                    )
            sensor_csvs.append(fname)
        ann_name = f"{rec.subject_id}_annotations.csv"
        with open(out_dir / ann_name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["start", "end", "label"])
            for start, end, label in rec.annotations:
                writer.writerow([start, end, label])
        entries.append(
            {
                "subject_id": rec.subject_id,
                "study_id": rec.study_id,
                "sample_rate_hz": rec.sample_rate_hz,
                "sensor_csvs": sensor_csvs,
                "annotation_csv": ann_name,
            }
        )
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump({"recordings": entries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
