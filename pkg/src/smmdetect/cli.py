"""Command-line entry point.

Subcommands cover the whole pipeline: ``synth`` writes a synthetic
multi-subject dataset, ``run`` evaluates one experiment kind end to end,
``train`` fits and saves a whole-study model, and ``export-pca`` dumps
2-D projections of raw, handcrafted, or learned features.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.  All
diagnostics go to stderr; machine-readable output goes to files or
stdout.  Every flag can also come from a JSON file via ``--config``
(keys are flag names with underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ValidationError
from .features import extract_baseline_features
from .harness import (
    ExperimentSpec,
    export_pca,
    export_report,
    run_experiment,
    train_study_model,
    write_summary_csv,
)
from .model_io import load_model, save_model
from .nn import TrainConfig, model_forward
from .pipeline import (
    HIGHPASS_CUTOFF_HZ,
    TARGET_RATE_HZ,
    WINDOW_LEN,
    WINDOW_STEP,
    apply_zca,
    fit_zca,
    preprocess_recording,
    segment_recordings,
)
from .recordings import STUDY_IDS, SynthConfig, load_recordings, synth_generate, write_recordings

EXPERIMENT_CHOICES = ("raw", "handcrafted", "cnn", "transfer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors map to exit code 1
        raise ValidationError(message)


def _log(args, message):
    if getattr(args, "verbose", False):
        print(message, file=sys.stderr)


def _add_common(p):
    p.add_argument("--config", help="JSON file of flag defaults (keys use underscores)")
    p.add_argument("--verbose", action="store_true", help="progress diagnostics on stderr")


def _add_windowing(p):
    p.add_argument("--target-rate", type=float, default=TARGET_RATE_HZ, help="resampling target (Hz)")
    p.add_argument("--highpass-cutoff", type=float, default=HIGHPASS_CUTOFF_HZ, help="high-pass cutoff (Hz)")
    p.add_argument("--window-len", type=int, default=WINDOW_LEN, help="window length in samples")
    p.add_argument("--step", type=int, default=WINDOW_STEP, help="window step in samples")


def _add_training(p):
    p.add_argument("--lr", type=float, default=0.01, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--init-std", type=float, default=0.01, help="weight init std")
    p.add_argument("--zca-epsilon", type=float, default=1e-5)


def _add_svm(p):
    p.add_argument("--svm-c", type=float, default=1.0, help="SVM regularization C")
    p.add_argument("--svm-epochs", type=int, default=20)


def build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="smmdetect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("synth", help="write a synthetic multi-subject dataset")
    p.add_argument("--out", required=True, help="output directory for manifest and CSVs")
    p.add_argument("--subjects", type=int, default=6)
    p.add_argument("--duration", type=float, default=120.0, help="seconds per subject")
    p.add_argument("--rate", type=float, default=90.0, help="sampling rate (Hz)")
    p.add_argument("--burst-rate", type=float, default=4.0, help="SMM bursts per minute")
    p.add_argument("--freq-low", type=float, default=1.0, help="burst frequency low edge (Hz)")
    p.add_argument("--freq-high", type=float, default=3.0, help="burst frequency high edge (Hz)")
    p.add_argument("--amplitude", type=float, default=1.0, help="burst amplitude")
    p.add_argument("--noise-std", type=float, default=0.5)
    p.add_argument("--jitter", type=float, default=0.1, help="per-subject fractional jitter")
    p.add_argument("--burst-min", type=float, default=2.0, help="shortest burst (s)")
    p.add_argument("--burst-max", type=float, default=5.0, help="longest burst (s)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--study-id", choices=STUDY_IDS, default="study1")
    _add_common(p)
    subparsers["synth"] = p

    p = sub.add_parser("run", help="run one experiment kind end to end")
    p.add_argument("--experiment", required=True, choices=EXPERIMENT_CHOICES)
    p.add_argument("--manifest", required=True, help="target-study manifest")
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--summary", help="CSV summary path (also printed to stdout)")
    p.add_argument("--repetitions", type=int, default=15)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--source-manifest", help="source-study manifest (transfer)")
    p.add_argument("--source-model", help="pre-trained source model file (transfer)")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold/repetition jobs")
    _add_windowing(p)
    _add_training(p)
    _add_svm(p)
    _add_common(p)
    subparsers["run"] = p

    p = sub.add_parser("train", help="train and save a model on a whole study")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=0)
    _add_windowing(p)
    _add_training(p)
    _add_common(p)
    subparsers["train"] = p

    p = sub.add_parser("export-pca", help="export 2-D PCA projections of features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True, choices=("raw", "handcrafted", "cnn"))
    p.add_argument("--model", help="model file (required for --features cnn)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--zca-epsilon", type=float, default=1e-5)
    _add_windowing(p)
    _add_common(p)
    subparsers["export-pca"] = p

    return parser, subparsers


def _apply_config(parser, subparsers, argv):
    """Load --config JSON (if any) as subcommand defaults, then reparse."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, rest = probe.parse_known_args(argv)
    command = rest[0] if rest and not rest[0].startswith("-") else None
    if known.config is None or command not in subparsers:
        return parser.parse_args(argv)
    with open(known.config) as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise ValidationError(f"{known.config}: config must be a JSON object")
    sub = subparsers[command]
    valid = {action.dest for action in sub._actions}
    unknown = set(overrides) - valid
    if unknown:
        raise ValidationError(f"{known.config}: unknown flags {sorted(unknown)}")
    sub.set_defaults(**overrides)
    return parser.parse_args(argv)


def _load_windows(args, manifest):
    recs = load_recordings(manifest)
    recs = [preprocess_recording(r, args.target_rate, args.highpass_cutoff) for r in recs]
    return segment_recordings(recs, args.window_len, args.step), recs


def _train_config(args, seed) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch_size,
        init_std=args.init_std,
        seed=seed,
    )


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_subjects=args.subjects,
        duration_s=args.duration,
        sample_rate_hz=args.rate,
        smm_burst_rate=args.burst_rate,
        burst_freq_range_hz=(args.freq_low, args.freq_high),
        burst_amplitude=args.amplitude,
        noise_std=args.noise_std,
        per_subject_jitter=args.jitter,
        burst_duration_range_s=(args.burst_min, args.burst_max),
        seed=args.seed,
        study_id=args.study_id,
    )
    recordings = synth_generate(cfg)
    manifest = write_recordings(recordings, args.out)
    _log(args, f"wrote {len(recordings)} recordings under {args.out}")
    print(manifest)
    return 0


def cmd_run(args) -> int:
    ds, recs = _load_windows(args, args.manifest)
    studies = sorted(set(r.study_id for r in recs))
    spec = ExperimentSpec(
        kind=args.experiment,
        train_cfg=_train_config(args, seed=0),
        svm_c=args.svm_c,
        svm_epochs=args.svm_epochs,
        repetitions=args.repetitions,
        base_seed=args.base_seed,
        zca_epsilon=args.zca_epsilon,
        target_study=",".join(studies),
    )
    source_data = None
    source_model = None
    if args.experiment == "transfer":
        if args.source_model:
            source_model = load_model(args.source_model)
            spec.source_study = str(source_model.metadata.get("source_study", args.source_model))
        elif args.source_manifest:
            source_data, source_recs = _load_windows(args, args.source_manifest)
            spec.source_study = ",".join(sorted(set(r.study_id for r in source_recs)))
        else:
            raise ValidationError("transfer experiment requires --source-model or --source-manifest")
    _log(args, f"running {args.experiment} on {ds.n_windows} windows, {args.repetitions} repetitions")
    report = run_experiment(spec, ds, source_data=source_data, source_model=source_model, jobs=args.jobs)
    if args.out:
        export_report(report, args.out)
        _log(args, f"report written to {args.out}")
    if args.summary:
        write_summary_csv([report], args.summary)
    write_summary_csv([report], sys.stdout)
    return 0


def cmd_train(args) -> int:
    ds, recs = _load_windows(args, args.manifest)
    studies = sorted(set(r.study_id for r in recs))
    spec = ExperimentSpec(
        kind="cnn",
        train_cfg=_train_config(args, seed=0),
        base_seed=args.seed,
        zca_epsilon=args.zca_epsilon,
        target_study=",".join(studies),
    )
    _log(args, f"training on {ds.n_windows} windows from {spec.target_study}")
    model = train_study_model(spec, ds)
    save_model(
        model,
        args.out,
        metadata={"seed": args.seed, "epochs": args.epochs, "source_study": spec.target_study},
    )
    _log(args, f"model written to {args.out}")
    return 0


def cmd_export_pca(args) -> int:
    ds, _ = _load_windows(args, args.manifest)
    if args.features == "raw":
        feats = ds.X.reshape(ds.n_windows, -1)
    elif args.features == "handcrafted":
        feats = extract_baseline_features(ds).values
    else:
        if not args.model:
            raise ValidationError("--features cnn requires --model")
        model = load_model(args.model)
        zca = fit_zca(ds.X, args.zca_epsilon)
        feats, _ = model_forward(model, apply_zca(zca, ds.X))
    export_pca(feats, ds.y, args.out)
    _log(args, f"PCA projection written to {args.out}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "run": cmd_run,
    "train": cmd_train,
    "export-pca": cmd_export_pca,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        args = _apply_config(parser, subparsers, argv if argv is not None else sys.argv[1:])
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
