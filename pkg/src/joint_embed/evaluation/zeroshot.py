"""零样本分类

每条语音取余弦最大的标签嵌入；标签嵌入重合时记录警告但照常分类。
"""

from typing import List, Optional, Sequence

import numpy as np

from ..datagen.zeroshot import ZeroShotDataset
from ..exceptions import EvaluationError
from ..logger import get_logger
from ..models.bundle import ModelBundle
from ..types.enums import ZeroShotKind
from ..types.reports import ZeroShotReport
from .embedding import embed_texts, embed_utterances
from .retrieval import check_unit_rows

logger = get_logger(__name__)

DUPLICATE_TOLERANCE = 1e-9


def duplicate_labels(label_embs: np.ndarray) -> List[str]:
    warnings = []
    for i in range(len(label_embs)):
        for j in range(i + 1, len(label_embs)):
            if np.max(np.abs(label_embs[i] - label_embs[j])) <= DUPLICATE_TOLERANCE:
                warnings.append(f"labels {i} and {j} have identical embeddings")
    return warnings


def mean_pairwise_cosine(label_embs: np.ndarray) -> float:
    sim = label_embs @ label_embs.T
    k = len(label_embs)
    return float((sim.sum() - np.trace(sim)) / (k * (k - 1)))


def zero_shot_classify(
    speech_embs: np.ndarray,
    label_embs: np.ndarray,
    truth: Sequence[int],
    kind: Optional[ZeroShotKind] = None,
) -> ZeroShotReport:
    """按最近标签嵌入分类

    Args:
        speech_embs: [n, dim] 单位化语音嵌入
        label_embs: [k, dim] 单位化标签嵌入，k ≥ 2
        truth: 每条语音的真实标签下标
        kind: 数据集类型

    Returns:
        ZeroShotReport: 准确率、混淆矩阵（行 = 真实，列 = 预测）与警告
    """
    speech = check_unit_rows(speech_embs, "speech_embs", instrument="zero_shot")
    labels = check_unit_rows(label_embs, "label_embs", instrument="zero_shot")
    truth = np.asarray(truth, dtype=np.int64)
    k = labels.shape[0]
    if k < 2:
        raise EvaluationError(
            "zero-shot classification needs at least 2 labels", instrument="zero_shot"
        )
    if speech.shape[1] != labels.shape[1]:
        raise EvaluationError(
            f"dims differ: {speech.shape[1]} vs {labels.shape[1]}",
            instrument="zero_shot",
        )
    if truth.shape != (speech.shape[0],) or truth.min() < 0 or truth.max() >= k:
        raise EvaluationError(
            "truth labels must index the label set, one per utterance",
            instrument="zero_shot",
        )

    predicted = np.argmax(speech @ labels.T, axis=1)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, predicted), 1)
    warnings = duplicate_labels(labels)
    for message in warnings:
        logger.warning(f"zero-shot {kind.value if kind else ''}: {message}")
    report = ZeroShotReport(
        kind=kind,
        n=int(speech.shape[0]),
        accuracy=float(np.trace(confusion) / speech.shape[0]),
        confusion=confusion.tolist(),
        warnings=warnings,
        mean_label_cosine=mean_pairwise_cosine(labels),
    )
    logger.info(
        f"zero-shot {kind.value if kind else ''} (n={report.n}, k={k}): "
        f"accuracy {report.accuracy:.4f}"
    )
    return report


def evaluate_zeroshot(
    bundle: ModelBundle, dataset: ZeroShotDataset, threads: int = 1
) -> ZeroShotReport:
    """用模型组的两条管线嵌入标签与语音后分类"""
    label_embs = embed_texts(bundle, dataset.labels, threads=threads)
    speech_embs = embed_utterances(
        bundle, [item.frames for item in dataset.items], threads=threads
    )
    return zero_shot_classify(speech_embs, label_embs, dataset.truth, dataset.kind)
