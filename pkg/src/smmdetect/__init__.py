"""Stereotypical motor movement (SMM) detection from multi-sensor
accelerometer recordings.

Pipeline: preprocess raw 3-axis streams (resample to 90 Hz, 0.1 Hz
high-pass), cut overlapping 1 s windows, learn features with a small
1-D CNN (or compute handcrafted time/frequency/Stockwell features),
classify with a linear SVM, and score with leave-one-subject-out F1.
"""

from .errors import UnsupportedVersionError, ValidationError
from .features import (
    FeatureMatrix,
    dft_band_powers,
    extract_baseline_features,
    stockwell_features,
    stockwell_transform,
    time_domain_features,
)
from .harness import (
    EvalReport,
    ExperimentSpec,
    export_pca,
    export_report,
    f1_score,
    loso_split,
    run_experiment,
    train_study_model,
    transfer_init,
    write_summary_csv,
)
from .model_io import load_model, save_model
from .nn import (
    AvgPoolLayer,
    CnnModel,
    Conv1DLayer,
    DenseLayer,
    FlattenLayer,
    ReLULayer,
    TrainConfig,
    avgpool_forward,
    build_smm_cnn,
    conv1d_forward,
    init_model,
    model_backward,
    model_forward,
    relu,
    sgd_momentum_step,
    softmax_xent,
    train,
)
from .pipeline import (
    WindowedDataset,
    ZcaTransform,
    apply_zca,
    balance_classes,
    fit_zca,
    highpass_filter,
    preprocess_recording,
    resample_linear,
    segment_recordings,
    segment_windows,
)
from .recordings import RawRecording, SynthConfig, load_recordings, synth_generate, write_recordings
from .svm import SvmModel, svm_predict, svm_train

__version__ = "0.1.0"
