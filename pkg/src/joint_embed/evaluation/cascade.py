"""级联基线：贪心解码 → 教师文本编码器"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..datagen.vocabulary import MASK_ID
from ..logger import get_logger
from ..models.bundle import ModelBundle, greedy_decode_batch
from .embedding import embed_texts

logger = get_logger(__name__)

FLAG_UNTERMINATED = "unterminated"
FLAG_EMPTY = "empty"
FLAG_TRUNCATED = "truncated"


@dataclass
class CascadeResult:
    embeddings: np.ndarray
    hypotheses: List[Tuple[int, ...]]
    flags: List[List[str]] = field(default_factory=list)

    @property
    def n_flagged(self) -> int:
        return sum(1 for item in self.flags if item)


def clean_hypothesis(
    tokens: Sequence[int], terminated: bool, max_len: int
) -> Tuple[Tuple[int, ...], List[str]]:
    """把解码结果变成教师可接受的输入，并记录所做的修补"""
    flags = [] if terminated else [FLAG_UNTERMINATED]
    tokens = tuple(tokens)
    if not tokens:
        tokens = (MASK_ID,)
        flags.append(FLAG_EMPTY)
    if len(tokens) > max_len:
        tokens = tokens[:max_len]
        flags.append(FLAG_TRUNCATED)
    return tokens, flags


def cascade_embed(
    frames: Sequence[np.ndarray],
    asr_bundle: ModelBundle,
    teacher: Optional[ModelBundle] = None,
    batch_size: int = 32,
    threads: int = 1,
) -> CascadeResult:
    """识别后再用教师嵌入转写

    Args:
        frames: 语音帧序列
        asr_bundle: 带解码器的模型组（学生 + 解码器）
        teacher: 提供教师编码器的模型组，默认与 asr_bundle 相同
        batch_size: 解码批大小
        threads: 文本嵌入线程数

    Returns:
        CascadeResult: 嵌入、转写与每条的修补标记
    """
    teacher = teacher or asr_bundle
    max_len = teacher.teacher.config.max_len
    hypotheses: List[Tuple[int, ...]] = []
    flags: List[List[str]] = []
    for start in range(0, len(frames), batch_size):
        for tokens, terminated in greedy_decode_batch(
            asr_bundle, list(frames[start:start + batch_size])
        ):
            cleaned, item_flags = clean_hypothesis(tokens, terminated, max_len)
            hypotheses.append(cleaned)
            flags.append(item_flags)
    result = CascadeResult(
        embeddings=embed_texts(teacher, hypotheses, threads=threads),
        hypotheses=hypotheses,
        flags=flags,
    )
    if result.n_flagged:
        logger.warning(
            f"cascade: {result.n_flagged}/{len(hypotheses)} transcriptions "
            "were repaired (truncated or empty)"
        )
    return result
