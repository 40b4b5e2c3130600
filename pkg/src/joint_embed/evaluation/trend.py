"""WER 与检索准确率的趋势表

每行对应一个 ASR 检查点：预训练 WER 与联合训练后的双向检索准确率。
表的生成在 training.trend 中完成，这里只负责表结构与秩相关。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from ..types.reports import TrendRow


@dataclass
class TrendTable:
    rows: List[TrendRow] = field(default_factory=list)
    spearman: Optional[float] = None


def spearman_trend(rows: Sequence[TrendRow]) -> Optional[float]:
    """(−WER) 与 T→S 准确率的 Spearman 相关；任一列为常数时无定义"""
    if len(rows) < 2:
        return None
    wers = np.array([-row.wer for row in rows])
    accs = np.array([row.acc_t2s for row in rows])
    if np.all(wers == wers[0]) or np.all(accs == accs[0]):
        return None
    return float(spearmanr(wers, accs).correlation)
