"""类型定义模块

包含枚举、配置模型、运行时记录与评估报告。
"""

from .enums import (
    CellStatus,
    Direction,
    InitMode,
    Modality,
    ProbingTask,
    Split,
    StudentInit,
    Trainable,
    ZeroShotKind,
)
from .configs import (
    AcousticConfig,
    AsrPretrainConfig,
    AugmentConfig,
    BundleConfig,
    CorpusConfig,
    DecoderConfig,
    JointConfig,
    ProbeClassifierConfig,
    ProbingSizes,
    ProjectionHeadConfig,
    SpeechEncoderConfig,
    TeacherPretrainConfig,
    TextEncoderConfig,
    ZeroShotConfig,
)
from .records import (
    Checkpoint,
    HistoryRow,
    LossComponents,
    ProbingExample,
    TrainResult,
    UtterancePair,
)
from .reports import (
    MatrixCell,
    OrderingCheck,
    ProbingReport,
    ReportSummary,
    RetrievalReport,
    TrendRow,
    ZeroShotReport,
)

__all__ = [
    "CellStatus",
    "Direction",
    "InitMode",
    "Modality",
    "ProbingTask",
    "Split",
    "StudentInit",
    "Trainable",
    "ZeroShotKind",
    "AcousticConfig",
    "AsrPretrainConfig",
    "AugmentConfig",
    "BundleConfig",
    "CorpusConfig",
    "DecoderConfig",
    "JointConfig",
    "ProbeClassifierConfig",
    "ProbingSizes",
    "ProjectionHeadConfig",
    "SpeechEncoderConfig",
    "TeacherPretrainConfig",
    "TextEncoderConfig",
    "ZeroShotConfig",
    "Checkpoint",
    "HistoryRow",
    "LossComponents",
    "ProbingExample",
    "TrainResult",
    "UtterancePair",
    "MatrixCell",
    "OrderingCheck",
    "ProbingReport",
    "ReportSummary",
    "RetrievalReport",
    "TrendRow",
    "ZeroShotReport",
]
