from .checkpoint import (Checkpoint, CheckpointConfigError, CheckpointError, CheckpointTruncatedError,
                         CheckpointVersionError, decode_checkpoint, encode_checkpoint, load_checkpoint,
                         save_checkpoint)
from .config import ConfigError, RunConfig, TrainConfig, load_config, parse_config
from .evaluate import EvalReport, EvalRow, evaluate_cell, evaluate_delta_sweep, evaluate_sweep
from .train import (Trainer, TrainingDiverged, distortion_loss, iteration_rng, sample_link_snrs,
                    train_step)

__all__ = [
    "RunConfig", "TrainConfig", "ConfigError", "load_config", "parse_config",
    "Checkpoint", "CheckpointError", "CheckpointVersionError", "CheckpointConfigError",
    "CheckpointTruncatedError", "encode_checkpoint", "decode_checkpoint", "save_checkpoint",
    "load_checkpoint",
    "EvalReport", "EvalRow", "evaluate_cell", "evaluate_sweep", "evaluate_delta_sweep",
    "Trainer", "TrainingDiverged", "distortion_loss", "sample_link_snrs", "train_step",
    "iteration_rng",
]
