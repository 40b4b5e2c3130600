"""运行时记录

数据生成与训练过程中流转的数据结构，使用 dataclass 定义。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .enums import ProbingTask


@dataclass
class UtterancePair:
    """一条配对样本：转写 token 序列 + 渲染得到的帧序列

    Attributes:
        id: 样本编号（在所属数据集内唯一）
        tokens: token id 序列
        frames: [time, frame_dim] 帧序列
        speaker: 说话人编号
        render_seed: 渲染随机流坐标，与 speaker 一起可复现 frames
    """
    id: str
    tokens: Tuple[int, ...]
    frames: np.ndarray
    speaker: int
    render_seed: int

    def __post_init__(self):
        self.tokens = tuple(int(t) for t in self.tokens)
        if not self.tokens:
            raise ValueError("utterance pair needs at least one token")

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass
class ProbingExample:
    """探针样本"""
    tokens: Tuple[int, ...]
    label: int
    task: ProbingTask
    frames: Optional[np.ndarray] = None
    speaker: int = 0
    render_seed: int = 0
    source: Optional[Tuple[int, ...]] = None  # SHIFT 任务中交换前的句子

    def __post_init__(self):
        self.tokens = tuple(int(t) for t in self.tokens)
        if self.source is not None:
            self.source = tuple(int(t) for t in self.source)


@dataclass
class HistoryRow:
    """损失历史中的一行"""
    step: int
    epoch: int
    lr: float
    ce: float
    l2: float
    total: float
    split: str

    def to_row(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "lr": repr(self.lr),
            "ce": repr(self.ce),
            "l2": repr(self.l2),
            "total": repr(self.total),
            "split": self.split,
        }


@dataclass
class LossComponents:
    ce: float = 0.0
    l2: float = 0.0
    total: float = 0.0

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.ce, self.l2, self.total))


@dataclass
class Checkpoint:
    """训练检查点：模型快照 + 所属场景、轮次与损失分量"""
    state: Dict[str, np.ndarray]
    scenario_id: str
    epoch: int
    step: int
    train: LossComponents = field(default_factory=LossComponents)
    valid: LossComponents = field(default_factory=LossComponents)

    def __post_init__(self):
        if not self.valid.is_finite():
            raise ValueError(
                f"checkpoint at epoch {self.epoch} has non-finite validation losses"
            )


@dataclass
class TrainResult:
    """一次训练的产出"""
    best: Checkpoint
    final: Checkpoint
    history: List[HistoryRow]
    initial_valid: LossComponents
    ce_l2_ratio: Optional[float] = None
    valid_wer: Optional[float] = None
    snapshots: Dict[int, Dict[str, np.ndarray]] = field(default_factory=dict)

    def valid_series(self) -> List[Tuple[int, float]]:
        return [(row.epoch, row.total) for row in self.history if row.split == "valid"]
