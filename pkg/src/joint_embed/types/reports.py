"""评估报告模型

所有报告都是 pydantic 模型，便于写出 CSV 行与 JSON 摘要。
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from .enums import CellStatus, ZeroShotKind


class RetrievalReport(BaseModel):
    """双向检索准确率"""
    dataset_id: str = Field(..., description="数据集标识")
    n: int = Field(..., gt=0, description="检索池大小")
    acc_t2s: float = Field(..., ge=0.0, le=1.0)
    acc_s2t: float = Field(..., ge=0.0, le=1.0)
    margin_t2s: float = Field(default=0.0, description="T→S 平均 top1−top2 余弦间隔")
    margin_s2t: float = Field(default=0.0, description="S→T 平均 top1−top2 余弦间隔")

    @property
    def asymmetry(self) -> float:
        return self.acc_t2s - self.acc_s2t


class ZeroShotReport(BaseModel):
    """零样本分类结果"""
    kind: Optional[ZeroShotKind] = None
    n: int = Field(..., gt=0)
    accuracy: float = Field(..., ge=0.0, le=1.0)
    confusion: List[List[int]]
    warnings: List[str] = Field(default_factory=list)
    mean_label_cosine: Optional[float] = Field(default=None, description="标签嵌入两两余弦均值")

    @model_validator(mode="after")
    def _check_confusion(self) -> "ZeroShotReport":
        total = sum(sum(row) for row in self.confusion)
        if total != self.n:
            raise ValueError(f"confusion matrix holds {total} items, expected {self.n}")
        return self


class ProbingReport(BaseModel):
    """一个探针任务在文本与语音两种模态上的准确率"""
    task: str
    n_classes: int = Field(..., ge=2)
    text_acc: float = Field(..., ge=0.0, le=1.0)
    speech_acc_before: float = Field(..., ge=0.0, le=1.0)
    speech_acc_after: float = Field(..., ge=0.0, le=1.0)
    classifier_hash: str = Field(..., description="分类器参数哈希，证明两种模态复用同一分类器")
    best_epoch: int = Field(default=0, ge=0)

    @property
    def delta(self) -> float:
        return self.speech_acc_after - self.speech_acc_before

    @property
    def gap_to_text(self) -> float:
        return self.text_acc - self.speech_acc_after


class MatrixCell(BaseModel):
    """实验矩阵中一个 (场景, 种子) 单元"""
    scenario_id: str
    seed: int
    status: CellStatus
    best_epoch: Optional[int] = None
    valid_l2: Optional[float] = None
    valid_total: Optional[float] = None
    ce_l2_ratio: Optional[float] = None
    valid_wer: Optional[float] = None
    error: Optional[str] = None
    run_dir: Optional[str] = None


class TrendRow(BaseModel):
    """WER 与检索准确率趋势表的一行"""
    checkpoint_step: int
    wer: float = Field(..., ge=0.0)
    acc_t2s: float = Field(..., ge=0.0, le=1.0)
    acc_s2t: float = Field(..., ge=0.0, le=1.0)


class OrderingCheck(BaseModel):
    """一条排序性质及其带符号间隔"""
    name: str
    holds: bool
    margin: float


class ReportSummary(BaseModel):
    """报告旁的 JSON 摘要"""
    kind: str
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    checkpoint_hashes: Dict[str, str] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)
