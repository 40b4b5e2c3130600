"""函数式接口：激活、池化、单位化与损失函数"""

import math
import zlib
from typing import Optional, Sequence, Union

import numpy as np

from ..exceptions import ConfigurationError, NonFiniteError, ShapeError
from .optim import LossWeights
from .tensor import (
    ArrayLike,
    Tensor,
    _state,
    as_tensor,
    primitive_forward,
)


def gelu(x: Tensor) -> Tensor:
    return primitive_forward("gelu", (x,))


def tanh(x: Tensor) -> Tensor:
    return primitive_forward("tanh", (x,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return primitive_forward("softmax", (x,), {"axis": axis})


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return primitive_forward("log_softmax", (x,), {"axis": axis})


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return primitive_forward("layer_norm", (x, gain, bias), {"eps": eps})


def layer_key(path: str) -> int:
    """由层路径得到稳定的 dropout 层编号"""
    return zlib.crc32(path.encode("utf-8"))


def dropout(x: Tensor, rate: float, layer_id: int) -> Tensor:
    """dropout，随机流坐标取自当前线程的 (seed, step)"""
    return primitive_forward(
        "dropout",
        (x,),
        {
            "rate": rate,
            "layer_id": layer_id,
            "seed": _state.dropout_seed,
            "step": _state.dropout_step,
            "eval": _state.eval_mode,
        },
    )


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    return primitive_forward("embedding", (weight,), {"ids": ids})


def conv1d(
    x: Tensor, weight: Tensor, bias: Tensor, stride: int, padding: int
) -> Tensor:
    attrs = {"stride": stride, "padding": padding}
    return primitive_forward("conv1d", (x, weight, bias), attrs)


def mean_pool_masked(states: Tensor, mask: Union[np.ndarray, Sequence[bool]]) -> Tensor:
    """对掩码为真的位置求均值

    Args:
        states: [..., time, dim] 状态
        mask: [..., time] 布尔掩码

    Returns:
        Tensor: [..., dim] 池化结果
    """
    attrs = {"mask": np.asarray(mask, dtype=bool)}
    return primitive_forward("mean_pool_masked", (states,), attrs)


def l2_normalize(v: Tensor) -> Tensor:
    """最后一维单位化；范数小于 1e-12 视为退化嵌入"""
    return primitive_forward("l2_normalize", (v,))


def l2_pair_loss(a: Tensor, b: ArrayLike, freeze_target: bool = True) -> Tensor:
    """平方欧氏距离 ‖a − b‖²，批输入时对批求均值

    Args:
        a: 学生嵌入 [dim] 或 [batch, dim]
        b: 教师嵌入，形状与 a 相同
        freeze_target: 为真时梯度只流向 a

    Returns:
        Tensor: 标量损失
    """
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(
            f"embedding shapes differ: {a.shape} vs {b.shape}",
            primitive="l2_pair_loss",
            dims=[a.shape, b.shape],
        )
    if freeze_target:
        b = b.detach()
    diff = a - b
    squared = (diff * diff).sum(axis=-1)
    return squared.mean() if a.ndim > 1 else squared


def smoothed_targets(
    targets: np.ndarray, vocab_size: int, epsilon: float
) -> np.ndarray:
    """构造 ε 平滑目标分布：目标类 1−ε，其余类平分 ε"""
    off_target = epsilon / (vocab_size - 1)
    dist = np.full(targets.shape + (vocab_size,), off_target, dtype=np.float64)
    np.put_along_axis(dist, targets[..., None], 1.0 - epsilon, axis=-1)
    return dist


def cross_entropy_label_smoothed(
    logits: Tensor,
    targets: Union[np.ndarray, Sequence[int]],
    epsilon: float = 0.1,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """带标签平滑的交叉熵，对非填充位置求均值

    Args:
        logits: [..., time, vocab]
        targets: [..., time] 目标 id
        epsilon: 平滑系数，0 ≤ ε < 1
        mask: [..., time] 有效位置，默认全部有效

    Returns:
        Tensor: 标量损失
    """
    targets = np.asarray(targets, dtype=np.int64)
    vocab_size = logits.shape[-1]
    if not 0.0 <= epsilon < 1.0:
        raise ConfigurationError(
            f"epsilon must be in [0, 1), got {epsilon}",
            config_key="label_smoothing",
            config_value=epsilon,
        )
    if vocab_size < 2:
        raise ShapeError(
            "vocabulary must contain at least 2 classes",
            primitive="cross_entropy",
            dims=[logits.shape],
        )
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(
            f"targets {targets.shape} do not match logits {logits.shape}",
            primitive="cross_entropy",
            dims=[logits.shape, targets.shape],
        )
    if targets.size and (targets.min() < 0 or targets.max() >= vocab_size):
        raise ShapeError(
            f"target id {int(targets.max())} outside vocabulary of size {vocab_size}",
            primitive="cross_entropy",
            dims=[vocab_size, int(targets.max())],
        )
    if mask is None:
        valid = np.ones(targets.shape, dtype=bool)
    else:
        valid = np.asarray(mask, dtype=bool)
    count = int(valid.sum())
    if count == 0:
        raise ShapeError(
            "no valid target positions", primitive="cross_entropy", dims=[targets.shape]
        )

    log_probs = log_softmax(logits)
    smoothed = smoothed_targets(targets, vocab_size, epsilon)
    per_position = (log_probs * smoothed).sum(axis=-1)
    weights = valid.astype(np.float64) / count
    return -(per_position * weights).sum()


def _value(term: Union[Tensor, float, None]) -> float:
    if term is None:
        return 0.0
    return term.item() if isinstance(term, Tensor) else float(term)


def total_loss(
    ce: Union[Tensor, float, None],
    l2: Union[Tensor, float, None],
    weights: LossWeights,
) -> Tensor:
    """L_total = γ·ce + β·l2

    Args:
        ce: 交叉熵项（γ=0 时可为 None）
        l2: 嵌入距离项（β=0 时可为 None）
        weights: 损失权重

    Returns:
        Tensor: 标量总损失
    """
    for label, term in (("ce", ce), ("l2", l2)):
        if not math.isfinite(_value(term)):
            raise NonFiniteError(
                f"non-finite loss ({label}={_value(term)})", name=label
            )

    total: Optional[Tensor] = None
    for weight, term in ((weights.gamma, ce), (weights.beta, l2)):
        if term is None:
            continue
        weighted = as_tensor(term) * weight
        total = weighted if total is None else total + weighted
    if total is None:
        raise ConfigurationError(
            "total_loss needs at least one loss term", config_key="loss_weights"
        )
    return total
