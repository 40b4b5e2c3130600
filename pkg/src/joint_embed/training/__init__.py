"""训练模块

教师与 ASR 预训练、联合嵌入训练、实验矩阵与运行目录。
"""

from .joint import build_scenario_bundle, teacher_targets, train_joint, trainable_groups
from .matrix import MatrixRun, reference_cell, run_cell, run_matrix
from .pretrain import (
    AsrPretrainResult,
    TeacherPretrainResult,
    decode_wer,
    masked_token_accuracy,
    pretrain_asr,
    pretrain_teacher,
)
from .rundir import HISTORY_FIELDS, RunDirectory
from .scenarios import REFERENCE_CELLS, TrainScenario, standard_matrix
from .trainer import (
    TrainLoopConfig,
    augment_batch,
    best_epoch,
    epoch_batches,
    evaluate_losses,
    train_loop,
)
from .trend import AsrSnapshot, wer_vs_retrieval

__all__ = [
    "build_scenario_bundle",
    "teacher_targets",
    "train_joint",
    "trainable_groups",
    "MatrixRun",
    "reference_cell",
    "run_cell",
    "run_matrix",
    "AsrPretrainResult",
    "TeacherPretrainResult",
    "decode_wer",
    "masked_token_accuracy",
    "pretrain_asr",
    "pretrain_teacher",
    "HISTORY_FIELDS",
    "RunDirectory",
    "REFERENCE_CELLS",
    "TrainScenario",
    "standard_matrix",
    "TrainLoopConfig",
    "augment_batch",
    "best_epoch",
    "epoch_batches",
    "evaluate_losses",
    "train_loop",
    "AsrSnapshot",
    "wer_vs_retrieval",
]
