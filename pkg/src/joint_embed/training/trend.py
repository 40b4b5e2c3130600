"""ASR 质量与对齐后检索准确率的趋势

对若干个不同训练程度的 ASR 检查点：先测验证集 WER，再以其为初始化做联合训练，
最后在测试集上测检索准确率。
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import ExperimentConfig
from ..datagen.corpus import Corpus
from ..evaluation.embedding import embed_texts, embed_utterances
from ..evaluation.retrieval import evaluate_retrieval
from ..evaluation.trend import TrendTable, spearman_trend
from ..logger import get_logger
from ..models.bundle import init_bundle
from ..types.records import UtterancePair
from ..types.reports import TrendRow
from .joint import train_joint
from .pretrain import decode_wer
from .scenarios import TrainScenario

logger = get_logger(__name__)

AsrSnapshot = Tuple[int, Dict[str, np.ndarray]]


def wer_vs_retrieval(
    snapshots: Sequence[AsrSnapshot],
    corpus: Corpus,
    config: ExperimentConfig,
    teacher_state: Dict[str, np.ndarray],
    scenario: TrainScenario,
    eval_pairs: Optional[Sequence[UtterancePair]] = None,
    threads: int = 1,
) -> TrendTable:
    """趋势表

    Args:
        snapshots: (步数, 学生 + 解码器参数) 列表
        corpus: 配对语料
        config: 实验配置
        teacher_state: 预训练教师参数
        scenario: 联合训练场景（通常为预训练初始化的 B）
        eval_pairs: 检索测试集，默认 corpus.test
        threads: 嵌入线程数

    Returns:
        TrendTable: 每个检查点一行与 Spearman 相关
    """
    eval_pairs = list(eval_pairs) if eval_pairs is not None else list(corpus.test)
    frames = [pair.frames for pair in eval_pairs]
    seqs = [pair.tokens for pair in eval_pairs]
    table = TrendTable()
    for step, state in snapshots:
        bundle = init_bundle(config.bundle, scenario.seed)
        bundle.load_state_dict(teacher_state, groups=["teacher"])
        bundle.load_state_dict(state, groups=["student", "decoder"])
        asr_wer = decode_wer(bundle, corpus.valid)
        train_joint(scenario, corpus, bundle)
        report = evaluate_retrieval(
            embed_utterances(bundle, frames, threads=threads),
            embed_texts(bundle, seqs, threads=threads),
            f"trend-{step}",
        )
        table.rows.append(
            TrendRow(
                checkpoint_step=step,
                wer=asr_wer,
                acc_t2s=report.acc_t2s,
                acc_s2t=report.acc_s2t,
            )
        )
        logger.info(
            f"trend step {step}: WER {asr_wer:.3f} -> T->S {report.acc_t2s:.4f}"
        )
    table.spearman = spearman_trend(table.rows)
    return table
