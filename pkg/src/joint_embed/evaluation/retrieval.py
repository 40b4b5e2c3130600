"""跨模态检索准确率

整套测试集作为一个检索池。相似度为余弦（输入行已单位化，即点积）；
并列时取下标最小者（np.argmax 返回第一个最大值）。
"""

from typing import Tuple, Union

import numpy as np

from ..exceptions import EvaluationError
from ..logger import get_logger
from ..types.enums import Direction
from ..types.reports import RetrievalReport

logger = get_logger(__name__)

UNIT_TOLERANCE = 1e-6


def check_unit_rows(
    embs: np.ndarray, name: str, instrument: str = "retrieval"
) -> np.ndarray:
    embs = np.asarray(embs, dtype=np.float64)
    if embs.ndim != 2 or embs.shape[0] == 0:
        raise EvaluationError(
            f"{name} must be a non-empty [n, dim] matrix, got {embs.shape}",
            instrument=instrument,
        )
    norms = np.linalg.norm(embs, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        worst = int(np.argmax(np.abs(norms - 1.0)))
        raise EvaluationError(
            f"{name} row {worst} has norm {norms[worst]:.6f}, expected unit norm",
            instrument=instrument,
        )
    return embs


def accuracy_from_similarity(
    sim: np.ndarray, direction: Union[Direction, str]
) -> Tuple[float, float]:
    """由相似度矩阵（行 = 语音，列 = 文本）计算某一方向的准确率与平均 top1−top2 间隔"""
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1] or sim.shape[0] == 0:
        raise EvaluationError(
            f"similarity matrix must be square and non-empty, got {sim.shape}",
            instrument="retrieval",
        )
    scores = sim if Direction(direction) == Direction.S2T else sim.T
    n = scores.shape[0]
    accuracy = float(np.mean(np.argmax(scores, axis=1) == np.arange(n)))
    if n == 1:
        return accuracy, 0.0
    top = np.sort(scores, axis=1)
    return accuracy, float(np.mean(top[:, -1] - top[:, -2]))


def retrieval_accuracy(
    speech_embs: np.ndarray,
    text_embs: np.ndarray,
    direction: Union[Direction, str],
) -> Tuple[float, float]:
    """以一种模态为查询、在另一模态中检索配对项

    Args:
        speech_embs: [n, dim] 语音嵌入
        text_embs: [n, dim] 文本嵌入，第 i 行与 speech_embs 第 i 行配对
        direction: T->S（文本查询）或 S->T（语音查询）

    Returns:
        Tuple[float, float]: (准确率, 平均 top1−top2 余弦间隔)
    """
    speech = check_unit_rows(speech_embs, "speech_embs")
    text = check_unit_rows(text_embs, "text_embs")
    if speech.shape != text.shape:
        raise EvaluationError(
            f"embedding matrices differ: {speech.shape} vs {text.shape}",
            instrument="retrieval",
        )
    return accuracy_from_similarity(speech @ text.T, direction)


def evaluate_retrieval(
    speech_embs: np.ndarray, text_embs: np.ndarray, dataset_id: str
) -> RetrievalReport:
    """双向检索报告"""
    acc_t2s, margin_t2s = retrieval_accuracy(speech_embs, text_embs, Direction.T2S)
    acc_s2t, margin_s2t = retrieval_accuracy(speech_embs, text_embs, Direction.S2T)
    report = RetrievalReport(
        dataset_id=dataset_id,
        n=len(speech_embs),
        acc_t2s=acc_t2s,
        acc_s2t=acc_s2t,
        margin_t2s=margin_t2s,
        margin_s2t=margin_s2t,
    )
    logger.info(
        f"retrieval {dataset_id} (n={report.n}): T->S {acc_t2s:.4f}  S->T {acc_s2t:.4f}"
    )
    return report
