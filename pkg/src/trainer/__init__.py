from utils.config_file import ConfigError
from trainer.config import DESK_PROFILE, TrainConfig, build_config, load_config, write_resolved
from trainer.schedule import lr_at
from trainer.optim import SGD
from trainer.splits import Split, SplitError, load_splits, make_splits, save_splits, select_split
from trainer.batches import BatchBuilder, StepBatch
from trainer.step import StepMetrics, TrainingDivergedError, train_step
from trainer.evaluate import EvaluationError, evaluate, predict
from trainer.metrics_log import HEADER, MetricsWriter, read_metrics
from trainer.runner import CHECKPOINT_NAME, RunResult, Trainer, load_datasets, run_training

__all__ = [
    "ConfigError",
    "DESK_PROFILE",
    "TrainConfig",
    "build_config",
    "load_config",
    "write_resolved",
    "lr_at",
    "SGD",
    "Split",
    "SplitError",
    "load_splits",
    "make_splits",
    "save_splits",
    "select_split",
    "BatchBuilder",
    "StepBatch",
    "StepMetrics",
    "TrainingDivergedError",
    "train_step",
    "EvaluationError",
    "evaluate",
    "predict",
    "HEADER",
    "MetricsWriter",
    "read_metrics",
    "CHECKPOINT_NAME",
    "RunResult",
    "Trainer",
    "load_datasets",
    "run_training",
]
