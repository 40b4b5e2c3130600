"""词错误率

编辑距离（替换 + 插入 + 删除）除以参考长度，可以大于 1。
"""

from typing import Sequence, Tuple

import numpy as np

from ..exceptions import EvaluationError


def edit_distance(reference: Sequence[int], hypothesis: Sequence[int]) -> int:
    """Levenshtein 距离（两行动态规划）"""
    reference, hypothesis = list(reference), list(hypothesis)
    previous = np.arange(len(hypothesis) + 1)
    for i, ref_token in enumerate(reference, start=1):
        current = np.empty_like(previous)
        current[0] = i
        for j, hyp_token in enumerate(hypothesis, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ref_token != hyp_token),
            )
        previous = current
    return int(previous[-1])


def wer(reference: Sequence[int], hypothesis: Sequence[int]) -> float:
    """单句 WER

    Raises:
        EvaluationError: 参考序列为空
    """
    if len(reference) == 0:
        raise EvaluationError("empty reference", instrument="wer")
    return edit_distance(reference, hypothesis) / len(reference)


def corpus_wer(pairs: Sequence[Tuple[Sequence[int], Sequence[int]]]) -> float:
    """语料级 WER：Σ 编辑距离 / Σ 参考长度

    Args:
        pairs: (reference, hypothesis) 列表
    """
    if not pairs:
        raise EvaluationError("no sentences to score", instrument="corpus_wer")
    edits = total = 0
    for reference, hypothesis in pairs:
        if len(reference) == 0:
            raise EvaluationError("empty reference", instrument="corpus_wer")
        edits += edit_distance(reference, hypothesis)
        total += len(reference)
    return edits / total
