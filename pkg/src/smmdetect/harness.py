"""Experiment harness: leave-one-subject-out evaluation of the four
experiment kinds, transfer-learning initialization, F1 scoring, and
report export.

Per fold, only training windows are balanced, whiten-fitted, and used
for CNN and SVM training; the held-out subject's windows are touched
only at prediction time.  All randomness is derived from the spec's
base seed through documented (repetition, fold, role) paths, so results
are reproducible and independent of execution order.  The raw and
handcrafted experiments contain no repetition-dependent randomness:
their streams are derived from (fold, role) alone, every repetition
yields the same score, and the reported std is exactly 0.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .features import extract_baseline_features
from .nn import CnnModel, TrainConfig, build_smm_cnn, model_forward, train
from .pipeline import WindowedDataset, apply_zca, balance_indices, fit_zca
from .seeding import BALANCE, INIT, SVM, TRAIN, child_seed
from .svm import svm_predict, svm_train

EXPERIMENT_KINDS = ("raw", "handcrafted", "cnn", "transfer")
DETERMINISTIC_KINDS = ("raw", "handcrafted")
REPORT_VERSION = 1
# Virtual fold index for source-study training streams; no real dataset
# comes close to this many subjects.
SOURCE_FOLD = 1_000_000


@dataclass
class ExperimentSpec:
    kind: str
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    svm_c: float = 1.0
    svm_epochs: int = 20
    repetitions: int = 15
    base_seed: int = 0
    zca_epsilon: float = 1e-5
    target_study: str = ""
    source_study: str = ""

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if self.svm_c <= 0 or self.svm_epochs < 1:
            raise ValidationError("svm_c must be positive and svm_epochs >= 1")
        self.train_cfg.validate()

    def echo(self) -> dict:
        """Full configuration echo; every report number is reproducible
        from this plus the input data."""
        return {
            "kind": self.kind,
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "zca_epsilon": self.zca_epsilon,
            "svm": {"C": self.svm_c, "epochs": self.svm_epochs},
            "train": self.train_cfg.as_dict(),
            "target_study": self.target_study,
            "source_study": self.source_study,
        }


@dataclass
class EvalReport:
    kind: str
    subjects: list[str]
    f1_runs: np.ndarray  # shape (n_subjects, repetitions)
    config: dict

    def __post_init__(self):
        self.f1_runs = np.asarray(self.f1_runs, dtype=np.float64)
        if self.f1_runs.shape[0] != len(self.subjects):
            raise ValidationError("one row of F1 runs per subject required")
        if self.f1_runs.size and (self.f1_runs.min() < 0 or self.f1_runs.max() > 1):
            raise ValidationError("F1 values must lie in [0, 1]")

    @property
    def f1_mean(self) -> np.ndarray:
        return self.f1_runs.mean(axis=1)

    @property
    def f1_std(self) -> np.ndarray:
        return self.f1_runs.std(axis=1)

    @property
    def grand_mean(self) -> float:
        return float(self.f1_mean.mean())

    def to_payload(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "experiment": self.config,
            "subjects": [
                {
                    "subject_id": subj,
                    "f1_mean": float(self.f1_mean[i]),
                    "f1_std": float(self.f1_std[i]),
                    "f1_runs": [float(v) for v in self.f1_runs[i]],
                }
                for i, subj in enumerate(self.subjects)
            ],
            "grand_mean": self.grand_mean,
        }


def loso_split(ds: WindowedDataset) -> list[tuple[np.ndarray, np.ndarray]]:
    """One (train indices, test indices) fold per subject, ordered by
    sorted subject id; test sets partition the dataset."""
    subjects = sorted(set(ds.subject_ids.tolist()))
    if len(subjects) < 2:
        raise ValidationError("leave-one-subject-out needs at least 2 subjects")
    folds = []
    for subj in subjects:
        test = np.flatnonzero(ds.subject_ids == subj)
        trainset = np.flatnonzero(ds.subject_ids != subj)
        folds.append((trainset, test))
    return folds


def f1_score(y_true, y_pred, positive: int = 1) -> float:
    """F1 with the SMM class positive; 0.0 when there are no true or
    predicted positives."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValidationError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    tp = int(np.sum((y_true == positive) & (y_pred == positive)))
    fp = int(np.sum((y_true != positive) & (y_pred == positive)))
    fn = int(np.sum((y_true == positive) & (y_pred != positive)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def transfer_init(source_model: CnnModel, target_model: CnnModel | None = None) -> CnnModel:
    """Deep-copy the source parameters as a starting point; nothing is
    frozen.  When ``target_model`` is given, its architecture must match."""
    if target_model is not None and source_model.architecture() != target_model.architecture():
        raise ValidationError(
            "source and target architectures differ: "
            f"{source_model.architecture()} vs {target_model.architecture()}"
        )
    return source_model.copy()


def _vector_features(kind: str, ds: WindowedDataset) -> np.ndarray:
    if kind == "raw":
        return ds.X.reshape(ds.n_windows, -1)
    return extract_baseline_features(ds).values


def _deterministic_fold_score(spec, F, y, trainset, test, fold) -> float:
    bal = trainset[balance_indices(y[trainset], child_seed(spec.base_seed, fold, BALANCE))]
    model = svm_train(F[bal], y[bal], spec.svm_c, spec.svm_epochs, child_seed(spec.base_seed, fold, SVM))
    return f1_score(y[test], svm_predict(model, F[test]))


def _train_on(spec: ExperimentSpec, ds: WindowedDataset, indices, model: CnnModel, rep: int, fold: int):
    """Balance + whiten the given windows and train the model on them."""
    bal = indices[balance_indices(ds.y[indices], child_seed(spec.base_seed, rep, fold, BALANCE))]
    zca = fit_zca(ds.X[bal], spec.zca_epsilon)
    x_train = apply_zca(zca, ds.X[bal])
    cfg = replace(spec.train_cfg, seed=child_seed(spec.base_seed, rep, fold, TRAIN))
    train(model, x_train, ds.y[bal], cfg)
    return model, zca, bal, x_train


def _nn_fold_score(spec, ds, trainset, test, rep, fold, make_model) -> float:
    model = make_model(rep, fold)
    model, zca, bal, x_train = _train_on(spec, ds, trainset, model, rep, fold)
    feats_train, _ = model_forward(model, x_train)
    feats_test, _ = model_forward(model, apply_zca(zca, ds.X[test]))
    svm = svm_train(
        feats_train, ds.y[bal], spec.svm_c, spec.svm_epochs, child_seed(spec.base_seed, rep, fold, SVM)
    )
    return f1_score(ds.y[test], svm_predict(svm, feats_test))


def train_study_model(spec: ExperimentSpec, source: WindowedDataset, rep: int = 0) -> CnnModel:
    """Train one model on an entire study (all subjects): balance,
    whiten, train.  Serves as the per-repetition transfer source and as
    the CLI's whole-study trainer."""
    model = build_smm_cnn(source.X.shape[1], source.X.shape[2]).initialize(
        child_seed(spec.base_seed, rep, SOURCE_FOLD, INIT), spec.train_cfg.init_std
    )
    model, _, _, _ = _train_on(spec, source, np.arange(source.n_windows), model, rep, SOURCE_FOLD)
    return model


def run_experiment(
    spec: ExperimentSpec,
    data: WindowedDataset,
    source_data: WindowedDataset | None = None,
    source_model: CnnModel | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Evaluate one experiment kind under LOSO with repeated seeds.

    ``data`` must already be windowed.  The transfer kind needs either
    ``source_data`` (a source-study model is then trained per
    repetition on all source subjects) or a fixed ``source_model``.
    """
    spec.validate()
    folds = loso_split(data)
    subjects = sorted(set(data.subject_ids.tolist()))
    runs = np.zeros((len(subjects), spec.repetitions))

    if spec.kind in DETERMINISTIC_KINDS:
        F = _vector_features(spec.kind, data)
        for fold, (trainset, test) in enumerate(folds):
            score = _deterministic_fold_score(spec, F, data.y, trainset, test, fold)
            runs[fold, :] = score
        return EvalReport(spec.kind, subjects, runs, spec.echo())

    if spec.kind == "transfer":
        if source_data is None and source_model is None:
            raise ValidationError("transfer experiment needs source_data or source_model")
        target_shell = build_smm_cnn(data.X.shape[1], data.X.shape[2])
        if source_model is not None:
            transfer_init(source_model, target_shell)  # architecture check
            sources = {rep: source_model for rep in range(spec.repetitions)}
        else:
            reps = range(spec.repetitions)
            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    trained = list(pool.map(lambda r: train_study_model(spec, source_data, r), reps))
            else:
                trained = [train_study_model(spec, source_data, r) for r in reps]
            for m in trained:
                transfer_init(m, target_shell)  # architecture check
            sources = dict(enumerate(trained))

        def make_model(rep, fold):
            return transfer_init(sources[rep])

    else:  # cnn

        def make_model(rep, fold):
            return build_smm_cnn(data.X.shape[1], data.X.shape[2]).initialize(
                child_seed(spec.base_seed, rep, fold, INIT), spec.train_cfg.init_std
            )

    job_list = [(rep, fold) for rep in range(spec.repetitions) for fold in range(len(folds))]

    def run_job(rep, fold):
        trainset, test = folds[fold]
        return _nn_fold_score(spec, data, trainset, test, rep, fold, make_model)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_job, rep, fold): (rep, fold) for rep, fold in job_list}
            for fut in as_completed(futures):
                rep, fold = futures[fut]
                runs[fold, rep] = fut.result()
    else:
        for rep, fold in job_list:
            runs[fold, rep] = run_job(rep, fold)
    return EvalReport(spec.kind, subjects, runs, spec.echo())


def export_report(report: EvalReport, path) -> None:
    """Versioned JSON report; keys sorted and floats repr-exact, so
    identical runs produce byte-identical files."""
    with open(Path(path), "w") as fh:
        json.dump(report.to_payload(), fh, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_summary_csv(reports: list[EvalReport], out) -> None:
    """Subject x experiment F1 table with a final grand-mean row.

    ``out`` may be a path or an open text stream.
    """
    if not reports:
        raise ValidationError("no reports to summarize")
    subjects = reports[0].subjects
    for rep in reports[1:]:
        if rep.subjects != subjects:
            raise ValidationError("reports cover different subject sets")
    rows = [["subject"] + [r.kind for r in reports]]
    for i, subj in enumerate(subjects):
        rows.append([subj] + [f"{r.f1_mean[i]:.4f}" for r in reports])
    rows.append(["mean"] + [f"{r.grand_mean:.4f}" for r in reports])
    if hasattr(out, "write"):
        csv.writer(out).writerows(rows)
    else:
        with open(Path(out), "w", newline="") as fh:
            csv.writer(fh).writerows(rows)


def pca_project(features: np.ndarray, n_components: int = 2) -> np.ndarray:
    """Project onto the top principal components of the feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] < n_components:
        raise ValidationError(f"need a (n, m) matrix with m >= {n_components}")
    centered = features - features.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return centered @ vt[:n_components].T


def export_pca(features: np.ndarray, labels, path) -> None:
    """CSV of 2-D PCA projections with class labels (pc1, pc2, label)."""
    labels = np.asarray(labels)
    projected = pca_project(features, 2)
    if projected.shape[0] != labels.shape[0]:
        raise ValidationError("features and labels must agree in length")
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pc1", "pc2", "label"])
        for row, label in zip(projected, labels):
            writer.writerow([repr(float(row[0])), repr(float(row[1])), int(label)])
