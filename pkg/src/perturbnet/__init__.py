"""Periodic prune-and-regrow weight perturbation for autoencoder
pretraining, with a finetuning and cross-validation harness for tabular
classification."""

from .data import (
    FoldSplit,
    StandardizerStats,
    TabularDataset,
    apply_standardizer,
    encode_labels,
    fit_standardizer,
    load_csv,
    load_dataset,
    load_manifest,
    stratified_kfold,
)
from .errors import ConfigError, DataError, NumericError
from .evaluation import FoldScores, aggregate_folds, confusion_counts, f1_score
from .experiments import ExperimentConfig, RunResult, long_run_trend, run_experiment, sweep_tau
from .models import (
    CASES,
    MODEL_KINDS,
    ModelSpec,
    Network,
    TrainConfig,
    TrainingRecord,
    build_model,
    encoder_of,
    finetune,
    predict,
    pretrain,
    pretrain_stacked,
    select_checkpoint,
    stack_encoders,
)
from .nn import (
    AdamConfig,
    LayerState,
    activation_grad,
    adam_step,
    backward,
    bce_loss,
    ce_loss,
    dense_forward,
    dropout_mask,
    forward,
    init_layer,
    mse_loss,
    reg_penalty,
)
from .perturb import (
    PerturbConfig,
    PerturbEvent,
    accumulate_mask,
    apply_mask,
    mask_zero_fraction,
    perturb_event,
    schedule_should_perturb,
    sparsity,
    threshold_mask,
)
from .store import SaveInfo, inspect_model, load_model, save_model

__version__ = "0.1.0"
