"""二维投影（主成分）

均值中心化后取协方差矩阵的前两个特征向量；每个轴的符号使绝对值最大的载荷为正。
秩小于 2 时第二个坐标全为零并标记。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..exceptions import EvaluationError
from ..logger import get_logger

logger = get_logger(__name__)

RANK_TOLERANCE = 1e-10


@dataclass
class Projection2D:
    points: np.ndarray  # [n, 2]
    variance_explained: float
    rank_deficient: bool = False
    labels: List[Any] = field(default_factory=list)
    modalities: List[str] = field(default_factory=list)

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "x": repr(float(x)),
                "y": repr(float(y)),
                "class": label,
                "modality": modality,
            }
            for (x, y), label, modality in zip(
                self.points, self.labels, self.modalities
            )
        ]


def project_2d(
    embeddings: np.ndarray,
    labels: Sequence[Any],
    modalities: Optional[Sequence[str]] = None,
) -> Projection2D:
    """前两个主成分上的坐标

    Args:
        embeddings: [n, dim]，n ≥ 3
        labels: 每行的类别
        modalities: 每行的模态，默认全部为 speech

    Returns:
        Projection2D: 坐标、方差解释比例与秩不足标记
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3:
        raise EvaluationError(
            f"projection needs at least 3 points, got shape {x.shape}",
            instrument="project_2d",
        )
    if x.shape[1] == 0:
        raise EvaluationError(
            "projection needs at least one embedding dimension", instrument="project_2d"
        )
    if len(labels) != x.shape[0]:
        raise EvaluationError("one label per row is required", instrument="project_2d")
    modalities = list(modalities) if modalities is not None else ["speech"] * x.shape[0]

    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    # 一维嵌入时第二个轴补零
    n_axes = min(x.shape[1], 2)
    axes = np.zeros((x.shape[1], 2))
    axes[:, :n_axes] = eigenvectors[:, :n_axes]
    for k in range(n_axes):
        pivot = int(np.argmax(np.abs(axes[:, k])))
        if axes[pivot, k] < 0:
            axes[:, k] = -axes[:, k]
    points = centered @ axes

    spectrum = float(eigenvalues.sum())
    second = float(eigenvalues[1]) if n_axes == 2 else 0.0
    rank_deficient = spectrum == 0.0 or second <= RANK_TOLERANCE * max(spectrum, 1.0)
    if rank_deficient:
        points[:, 1] = 0.0
        logger.warning("project_2d: embeddings have rank < 2, second axis set to zero")
    explained = float(eigenvalues[:n_axes].sum() / spectrum) if spectrum > 0 else 0.0
    return Projection2D(points, explained, rank_deficient, list(labels), modalities)
