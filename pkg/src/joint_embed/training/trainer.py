"""共享训练循环

教师预训练、ASR 预训练与联合训练都走同一个循环：相同的批次顺序（由种子和轮次决定）、
相同的 dropout/增强随机流坐标与学习率调度。因此 β=0 的多任务训练与纯 ASR 训练逐步一致。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.functional import total_loss
from ..core.optim import Adam, LossWeights, LrSchedule, lr_at_step
from ..core.tensor import (
    Tensor,
    backward,
    current_tape,
    eval_mode,
    inference_mode,
    set_dropout_stream,
)
from ..datagen.acoustic import spec_augment_like
from ..exceptions import FrozenParameterDriftError, NonFiniteError, TrainingError
from ..logger import get_logger
from ..models.bundle import ModelBundle
from ..types.configs import AugmentConfig
from ..types.records import Checkpoint, HistoryRow, LossComponents, TrainResult

logger = get_logger(__name__)

# loss_fn(batch, training, key) -> (ce, l2)；key 为随机流坐标
LossFn = Callable[
    [List[Any], bool, Tuple[int, ...]], Tuple[Optional[Tensor], Optional[Tensor]]
]


@dataclass
class TrainLoopConfig:
    scenario_id: str
    epochs: int
    batch_size: int
    schedule: LrSchedule
    weights: LossWeights
    seed: int
    trainable: Sequence[str]
    snapshot_steps: Sequence[int] = field(default_factory=tuple)


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> List[np.ndarray]:
    """第 epoch 轮的批次划分（由 seed 与 epoch 决定的随机顺序）"""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 808, epoch]))
    order = rng.permutation(n)
    return [order[start:start + batch_size] for start in range(0, n, batch_size)]


def augment_key(seed: int, step: int, index: int) -> Tuple[int, int, int, int]:
    """第 step 步批内第 index 条样本的增强随机流坐标"""
    return (seed, 909, step, index)


def augment_batch(
    frames: Sequence[np.ndarray], augment: AugmentConfig, seed: int, step: int
) -> List[np.ndarray]:
    """训练批的时间/通道掩码；掩码上限截断到样本自身的长度与维度"""
    if not augment.spec_augment:
        return list(frames)
    out = []
    for index, f in enumerate(frames):
        time_max = min(augment.time_mask_max, f.shape[0])
        channel_max = min(augment.channel_mask_max, f.shape[1])
        out.append(
            spec_augment_like(f, time_max, channel_max, augment_key(seed, step, index))
        )
    return out


def _value(term: Optional[Tensor]) -> float:
    return 0.0 if term is None else term.item()


def combine(ce: float, l2: float, weights: LossWeights) -> float:
    return weights.gamma * ce + weights.beta * l2


def evaluate_losses(
    loss_fn: LossFn, items: List[Any], batch_size: int, weights: LossWeights
) -> LossComponents:
    """推理模式下的平均损失分量（按样本数加权）"""
    if not items:
        raise TrainingError("validation set is empty")
    ce_sum = l2_sum = 0.0
    with inference_mode():
        for index, start in enumerate(range(0, len(items), batch_size)):
            batch = items[start:start + batch_size]
            ce, l2 = loss_fn(batch, False, (index,))
            ce_sum += _value(ce) * len(batch)
            l2_sum += _value(l2) * len(batch)
    ce_mean, l2_mean = ce_sum / len(items), l2_sum / len(items)
    return LossComponents(
        ce=ce_mean, l2=l2_mean, total=combine(ce_mean, l2_mean, weights)
    )


def configure_groups(bundle: ModelBundle, trainable: Sequence[str]) -> Dict[str, str]:
    """解冻可训练组、冻结其余组，返回冻结组的内容摘要"""
    unknown = set(trainable) - set(bundle.modules())
    if unknown:
        raise TrainingError(f"unknown or missing parameter groups {sorted(unknown)}")
    digests = {}
    for group in bundle.modules():
        if group in trainable:
            bundle.unfreeze(group)
        else:
            bundle.freeze(group)
            digests[group] = bundle.digest(group)
    return digests


def check_frozen(
    bundle: ModelBundle, digests: Dict[str, str], scenario_id: Optional[str] = None
) -> None:
    for group, digest in digests.items():
        if bundle.digest(group) != digest:
            raise FrozenParameterDriftError(group, scenario_id=scenario_id)


def train_loop(
    bundle: ModelBundle,
    train_items: List[Any],
    valid_items: List[Any],
    loss_fn: LossFn,
    loop: TrainLoopConfig,
) -> TrainResult:
    """运行训练循环

    每步：设定 dropout 随机流 → 前向 → 总损失 → 反向 → Adam；
    每轮：记录验证损失，验证总损失严格更小时更新最佳检查点（并列取最早的轮次）。

    Args:
        bundle: 模型组（原地更新）
        train_items: 训练样本
        valid_items: 验证样本
        loss_fn: 计算 (ce, l2) 的函数
        loop: 循环参数

    Returns:
        TrainResult: 最佳/最终检查点与损失历史
    """
    if not train_items:
        raise TrainingError("training set is empty", scenario_id=loop.scenario_id)
    digests = configure_groups(bundle, loop.trainable)
    optimizer = Adam(bundle.parameters(list(loop.trainable)))
    snapshot_steps = set(loop.snapshot_steps)

    initial = evaluate_losses(loss_fn, valid_items, loop.batch_size, loop.weights)
    logger.info(
        f"[{loop.scenario_id}] initial valid ce={initial.ce:.4f} l2={initial.l2:.4f} total={initial.total:.4f}"
    )

    history: List[HistoryRow] = []
    snapshots: Dict[int, Dict[str, np.ndarray]] = {}
    best: Optional[Checkpoint] = None
    first_epoch: List[HistoryRow] = []
    step = 0
    lr = 0.0
    for epoch in range(1, loop.epochs + 1):
        epoch_rows: List[HistoryRow] = []
        for indices in epoch_batches(
            len(train_items), loop.batch_size, loop.seed, epoch
        ):
            step += 1
            lr = lr_at_step(step, loop.schedule)
            batch = [train_items[i] for i in indices]
            current_tape().clear()
            set_dropout_stream(loop.seed, step)
            with eval_mode(False):
                try:
                    ce, l2 = loss_fn(batch, True, (step,))
                    total = total_loss(ce, l2, loop.weights)
                    optimizer.zero_grad()
                    backward(total)
                    optimizer.step(lr)
                except NonFiniteError as exc:
                    current_tape().clear()
                    raise TrainingError(
                        f"divergence at step {step}: {exc.message}",
                        scenario_id=loop.scenario_id,
                        step=step,
                        cause=exc,
                    ) from exc
            row = HistoryRow(
                step, epoch, lr, _value(ce), _value(l2), total.item(), "train"
            )
            history.append(row)
            epoch_rows.append(row)
            if step in snapshot_steps:
                snapshots[step] = bundle.state_dict(list(loop.trainable))
        if epoch == 1:
            first_epoch = epoch_rows

        valid = evaluate_losses(loss_fn, valid_items, loop.batch_size, loop.weights)
        if not valid.is_finite():
            raise TrainingError(
                f"non-finite validation loss at step {step}",
                scenario_id=loop.scenario_id,
                step=step,
            )
        history.append(
            HistoryRow(step, epoch, lr, valid.ce, valid.l2, valid.total, "valid")
        )
        train = LossComponents(
            ce=float(np.mean([r.ce for r in epoch_rows])),
            l2=float(np.mean([r.l2 for r in epoch_rows])),
            total=float(np.mean([r.total for r in epoch_rows])),
        )
        logger.info(
            f"[{loop.scenario_id}] epoch {epoch}/{loop.epochs} step {step} lr={lr:.2e} "
            f"train ce={train.ce:.4f} l2={train.l2:.4f} total={train.total:.4f} | "
            f"valid ce={valid.ce:.4f} l2={valid.l2:.4f} total={valid.total:.4f}"
        )
        if best is None or valid.total < best.valid.total:
            best = Checkpoint(
                bundle.state_dict(), loop.scenario_id, epoch, step, train, valid
            )

    check_frozen(bundle, digests, loop.scenario_id)
    final = Checkpoint(
        bundle.state_dict(), loop.scenario_id, loop.epochs, step, train, valid
    )
    return TrainResult(
        best=best,
        final=final,
        history=history,
        initial_valid=initial,
        ce_l2_ratio=ce_l2_ratio(first_epoch),
        snapshots=snapshots,
    )


def ce_l2_ratio(rows: List[HistoryRow]) -> Optional[float]:
    """mean(ce) / mean(l2)，两项都存在时才有意义"""
    if not rows:
        return None
    ce = float(np.mean([r.ce for r in rows]))
    l2 = float(np.mean([r.l2 for r in rows]))
    if ce <= 0.0 or l2 <= 0.0 or not math.isfinite(ce / l2):
        return None
    return ce / l2


def best_epoch(history: List[HistoryRow]) -> int:
    """验证总损失的 argmin 轮次（并列取最早）"""
    valid = [(row.total, row.epoch) for row in history if row.split == "valid"]
    if not valid:
        raise TrainingError("history has no validation rows")
    lowest = min(total for total, _ in valid)
    return min(epoch for total, epoch in valid if total == lowest)
