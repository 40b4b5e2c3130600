"""联合嵌入训练

教师冻结，目标文本嵌入在训练前一次性算好；损失只沿语音管线反传。
多任务场景在同一组学生状态上追加解码器交叉熵。
"""

from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import ExperimentConfig
from ..core import functional as F
from ..core.tensor import inference_mode
from ..datagen.corpus import Corpus
from ..exceptions import ConfigurationError
from ..logger import get_logger
from ..models.bundle import (
    ModelBundle,
    embed_speech_states,
    encode_text_batch,
    init_bundle,
    speech_states,
)
from ..types.enums import InitMode, StudentInit, Trainable
from ..types.records import TrainResult, UtterancePair
from .pretrain import asr_cross_entropy, decode_wer
from .scenarios import TrainScenario
from .trainer import TrainLoopConfig, augment_batch, train_loop

logger = get_logger(__name__)

PathLike = Union[str, Path]
JointItem = Tuple[UtterancePair, np.ndarray]


def trainable_groups(scenario: TrainScenario) -> List[str]:
    if scenario.trainable == Trainable.PROJECTION_ONLY:
        return ["projection"]
    groups = ["student", "projection"]
    if scenario.multitask:
        groups.append("decoder")
    return groups


def build_scenario_bundle(
    scenario: TrainScenario,
    config: ExperimentConfig,
    teacher_path: PathLike,
    asr_path: Optional[PathLike] = None,
) -> ModelBundle:
    """按场景构建初始模型组：教师来自 teacher_path，预训练学生与解码器来自 asr_path"""
    if scenario.student_init == StudentInit.PRETRAINED:
        if asr_path is None:
            raise ConfigurationError(
                f"scenario {scenario.scenario_id} needs an ASR checkpoint", config_key="asr_path"
            )
        return init_bundle(
            config.bundle,
            scenario.seed,
            InitMode.FROM_CHECKPOINT,
            checkpoint_path=asr_path,
            teacher_path=teacher_path,
        )
    return init_bundle(
        config.bundle,
        scenario.seed,
        InitMode.TEACHER_PRETRAINED,
        teacher_path=teacher_path,
    )


def teacher_targets(
    bundle: ModelBundle, pairs: Sequence[UtterancePair], batch_size: int = 64
) -> np.ndarray:
    """冻结教师的文本嵌入 [n, dim_t]（推理模式）"""
    chunks = []
    with inference_mode():
        for start in range(0, len(pairs), batch_size):
            seqs = [pair.tokens for pair in pairs[start:start + batch_size]]
            chunks.append(encode_text_batch(bundle, seqs).data)
    return np.concatenate(chunks, axis=0)


def train_joint(
    scenario: TrainScenario, corpus: Corpus, bundle: ModelBundle
) -> TrainResult:
    """训练学生使其语音嵌入逼近冻结教师的文本嵌入

    Args:
        scenario: 训练场景
        corpus: 配对语料
        bundle: 初始模型组（教师已预训练，学生按场景初始化）

    Returns:
        TrainResult: 最佳/最终检查点与损失历史；模型组载入最佳检查点，
        多任务场景附带验证集 WER
    """
    if scenario.multitask:
        bundle.require_decoder()
    groups = trainable_groups(scenario)
    train_items = list(zip(corpus.train, teacher_targets(bundle, corpus.train)))
    valid_items = list(zip(corpus.valid, teacher_targets(bundle, corpus.valid)))

    def loss_fn(batch: List[JointItem], training: bool, key: Tuple[int, ...]):
        frames = [pair.frames for pair, _ in batch]
        if training:
            frames = augment_batch(frames, scenario.augment, scenario.seed, key[0])
        states, mask = speech_states(bundle, frames)
        l2 = F.l2_pair_loss(
            embed_speech_states(bundle, states, mask),
            np.stack([target for _, target in batch]),
        )
        ce = None
        if scenario.multitask:
            ce = asr_cross_entropy(
                bundle,
                states,
                mask,
                [pair.tokens for pair, _ in batch],
                scenario.label_smoothing,
            )
        return ce, l2

    result = train_loop(
        bundle,
        train_items,
        valid_items,
        loss_fn,
        TrainLoopConfig(
            scenario_id=scenario.scenario_id,
            epochs=scenario.epochs,
            batch_size=scenario.batch_size,
            schedule=scenario.schedule,
            weights=scenario.weights,
            seed=scenario.seed,
            trainable=groups,
        ),
    )
    bundle.load_state_dict(result.best.state, groups=groups)
    if scenario.multitask:
        result.valid_wer = decode_wer(bundle, corpus.valid, scenario.batch_size)
        logger.info(
            f"[{scenario.scenario_id}] validation WER at best checkpoint "
            f"{result.valid_wer:.3f}"
        )
    return result
