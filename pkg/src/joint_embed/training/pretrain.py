"""预训练

- pretrain_teacher：教师文本编码器的掩码词预测（15% 位置替换为 mask，每句至少一个）
- pretrain_asr：学生语音编码器 + 解码器的带标签平滑交叉熵训练，报告验证集贪心解码 WER
"""

from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config import ExperimentConfig
from ..core import functional as F
from ..core.optim import LossWeights
from ..core.tensor import Tensor, inference_mode
from ..datagen.corpus import Corpus
from ..datagen.vocabulary import MASK_ID
from ..evaluation.wer import corpus_wer
from ..logger import get_logger
from ..models.bundle import (
    ModelBundle,
    decoder_inputs,
    decoder_logits,
    greedy_decode_batch,
    init_bundle,
    pad_tokens,
    speech_states,
)
from ..types.records import TrainResult, UtterancePair
from .trainer import TrainLoopConfig, augment_batch, train_loop

logger = get_logger(__name__)

TEACHER_GROUPS = ["teacher"]
ASR_GROUPS = ["student", "decoder"]


# ---------------------------------------------------------------------------
# 教师：掩码词预测
# ---------------------------------------------------------------------------

@dataclass
class MaskedSentence:
    tokens: Tuple[int, ...]
    positions: Optional[np.ndarray] = None  # None 表示每步重新抽取


@dataclass
class TeacherPretrainResult:
    bundle: ModelBundle
    result: TrainResult
    initial_accuracy: float
    masked_accuracy: float
    baseline_accuracy: float


def mask_positions(length: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    count = max(1, int(round(rate * length)))
    return np.sort(rng.choice(length, size=min(count, length), replace=False))


def _masked_batch(
    batch: Sequence[MaskedSentence], rate: float, seed: int, key: Tuple[int, ...]
):
    ids, mask = pad_tokens([item.tokens for item in batch])
    inputs = ids.copy()
    target_mask = np.zeros(ids.shape, dtype=bool)
    for row, item in enumerate(batch):
        positions = item.positions
        if positions is None:
            rng = np.random.default_rng(np.random.SeedSequence([seed, 111, *key, row]))
            positions = mask_positions(len(item.tokens), rate, rng)
        inputs[row, positions] = MASK_ID
        target_mask[row, positions] = True
    return inputs, mask, ids, target_mask


def masked_token_accuracy(
    bundle: ModelBundle, items: Sequence[MaskedSentence], batch_size: int = 64
) -> float:
    """掩码位置上 argmax 预测等于原 token 的比例（推理模式）"""
    correct = total = 0
    with inference_mode():
        for start in range(0, len(items), batch_size):
            inputs, mask, targets, target_mask = _masked_batch(
                items[start:start + batch_size], 0.0, 0, ()
            )
            predicted = np.argmax(bundle.teacher.mlm_logits(inputs, mask).data, axis=-1)
            correct += int((predicted == targets)[target_mask].sum())
            total += int(target_mask.sum())
    return correct / max(total, 1)


def unigram_baseline(
    train: Sequence[Sequence[int]], items: Sequence[MaskedSentence]
) -> float:
    """总是预测训练集中最常见 token 的准确率"""
    majority = Counter(t for seq in train for t in seq).most_common(1)[0][0]
    hits = [item.tokens[p] == majority for item in items for p in item.positions]
    return float(np.mean(hits)) if hits else 0.0


def pretrain_teacher(
    corpus: Corpus,
    config: ExperimentConfig,
    seed: int,
    bundle: Optional[ModelBundle] = None,
) -> TeacherPretrainResult:
    """掩码词预测预训练教师编码器

    训练掩码按 (seed, 步数, 批内位置) 每步重新抽取；验证掩码固定，使验证损失可比。
    返回的模型组载入了验证损失最小的检查点。

    Args:
        corpus: 配对语料（只使用 token）
        config: 实验配置（teacher_pretrain 分节）
        seed: 种子
        bundle: 已有模型组，默认按 seed 随机初始化

    Returns:
        TeacherPretrainResult: 模型组、训练结果、验证掩码准确率与多数类基线
    """
    recipe = config.teacher_pretrain
    bundle = bundle or init_bundle(config.bundle, seed)
    train_items = [MaskedSentence(pair.tokens) for pair in corpus.train]
    valid_rng = np.random.default_rng(np.random.SeedSequence([seed, 112]))
    valid_items = [
        MaskedSentence(
            pair.tokens, mask_positions(len(pair.tokens), recipe.mask_rate, valid_rng)
        )
        for pair in corpus.valid
    ]

    def loss_fn(batch: List[MaskedSentence], training: bool, key: Tuple[int, ...]):
        inputs, mask, targets, target_mask = _masked_batch(
            batch, recipe.mask_rate, seed, key
        )
        logits = bundle.teacher.mlm_logits(inputs, mask)
        return F.cross_entropy_label_smoothed(logits, targets, 0.0, target_mask), None

    initial_accuracy = masked_token_accuracy(bundle, valid_items)
    result = train_loop(
        bundle,
        train_items,
        valid_items,
        loss_fn,
        TrainLoopConfig(
            scenario_id="teacher",
            epochs=recipe.epochs,
            batch_size=recipe.batch_size,
            schedule=recipe.schedule,
            weights=LossWeights(gamma=1.0, beta=0.0),
            seed=seed,
            trainable=TEACHER_GROUPS,
        ),
    )
    bundle.load_state_dict(result.best.state, groups=TEACHER_GROUPS)
    accuracy = masked_token_accuracy(bundle, valid_items)
    baseline = unigram_baseline([pair.tokens for pair in corpus.train], valid_items)
    logger.info(
        f"teacher masked-token accuracy {initial_accuracy:.3f} -> {accuracy:.3f} "
        f"(unigram baseline {baseline:.3f}, best epoch {result.best.epoch})"
    )
    return TeacherPretrainResult(bundle, result, initial_accuracy, accuracy, baseline)


# ---------------------------------------------------------------------------
# 学生：ASR
# ---------------------------------------------------------------------------

@dataclass
class AsrPretrainResult:
    bundle: ModelBundle
    result: TrainResult
    initial_wer: float
    valid_wer: float


def asr_cross_entropy(
    bundle: ModelBundle,
    states: Tensor,
    memory_mask: np.ndarray,
    seqs: Sequence[Sequence[int]],
    label_smoothing: float,
) -> Tensor:
    """教师强制下解码器的标签平滑交叉熵"""
    prefix_ids, target_ids, target_mask = decoder_inputs(seqs)
    logits = decoder_logits(bundle, states, memory_mask, prefix_ids)
    return F.cross_entropy_label_smoothed(
        logits, target_ids, label_smoothing, target_mask
    )


def decode_wer(
    bundle: ModelBundle, pairs: Sequence[UtterancePair], batch_size: int = 32
) -> float:
    """贪心解码的语料级 WER"""
    scored: List[Tuple[Sequence[int], Sequence[int]]] = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start:start + batch_size]
        decoded = greedy_decode_batch(bundle, [pair.frames for pair in batch])
        scored.extend(
            (pair.tokens, hypothesis) for pair, (hypothesis, _) in zip(batch, decoded)
        )
    return corpus_wer(scored)


def pretrain_asr(
    corpus: Corpus,
    config: ExperimentConfig,
    seed: int,
    bundle: Optional[ModelBundle] = None,
    snapshot_steps: Optional[Sequence[int]] = None,
) -> AsrPretrainResult:
    """ASR 预训练：只更新学生编码器与解码器

    Args:
        corpus: 配对语料
        config: 实验配置（asr_pretrain 分节，必须配置解码器）
        seed: 种子（初始化、批次顺序、dropout 与增强）
        bundle: 已有模型组，默认 init_bundle(config.bundle, seed)
        snapshot_steps: 额外保存参数快照的步数，默认取配置

    Returns:
        AsrPretrainResult: 载入最佳检查点的模型组、训练结果与验证 WER
    """
    recipe = config.asr_pretrain
    bundle = bundle or init_bundle(config.bundle, seed)
    bundle.require_decoder()

    def loss_fn(batch: List[UtterancePair], training: bool, key: Tuple[int, ...]):
        frames = [pair.frames for pair in batch]
        if training:
            frames = augment_batch(frames, recipe.augment, seed, key[0])
        states, mask = speech_states(bundle, frames)
        seqs = [pair.tokens for pair in batch]
        ce = asr_cross_entropy(bundle, states, mask, seqs, recipe.label_smoothing)
        return ce, None

    initial_wer = decode_wer(bundle, corpus.valid, recipe.batch_size)
    result = train_loop(
        bundle,
        list(corpus.train),
        list(corpus.valid),
        loss_fn,
        TrainLoopConfig(
            scenario_id="asr",
            epochs=recipe.epochs,
            batch_size=recipe.batch_size,
            schedule=recipe.schedule,
            weights=LossWeights(gamma=1.0, beta=0.0),
            seed=seed,
            trainable=ASR_GROUPS,
            snapshot_steps=tuple(
                snapshot_steps if snapshot_steps is not None else recipe.snapshot_steps
            ),
        ),
    )
    bundle.load_state_dict(result.best.state, groups=ASR_GROUPS)
    valid_wer = decode_wer(bundle, corpus.valid, recipe.batch_size)
    result.valid_wer = valid_wer
    logger.info(
        f"ASR validation WER {initial_wer:.3f} -> {valid_wer:.3f} "
        f"(best epoch {result.best.epoch})"
    )
    return AsrPretrainResult(bundle, result, initial_wer, valid_wer)
