"""优化器、学习率调度与损失权重"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..exceptions import ConfigurationError, NonFiniteError, ShapeError
from .tensor import Tensor


class LossWeights(BaseModel):
    """多任务损失权重：γ 乘交叉熵，β 乘 L2"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma: float = Field(default=0.0, ge=0.0, description="交叉熵权重")
    beta: float = Field(default=1.0, ge=0.0, description="L2 权重")

    @model_validator(mode="after")
    def _check_positive(self) -> "LossWeights":
        if self.gamma + self.beta <= 0.0:
            raise ValueError("gamma + beta must be positive")
        return self


class LrSchedule(BaseModel):
    """线性预热 + 平方根倒数衰减"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    peak_lr: float = Field(default=1e-3, gt=0.0, description="峰值学习率")
    warmup_steps: int = Field(default=300, ge=1, description="预热步数")


def lr_at_step(step: int, schedule: LrSchedule) -> float:
    """第 step 步（从 1 开始）的学习率

    预热期内从 0 线性升至峰值，之后按 peak·sqrt(warmup/step) 衰减。
    """
    if step < 1:
        raise ConfigurationError(
            f"step must be >= 1, got {step}", config_key="step", config_value=step
        )
    if step <= schedule.warmup_steps:
        return schedule.peak_lr * step / schedule.warmup_steps
    return schedule.peak_lr * math.sqrt(schedule.warmup_steps / step)


@dataclass
class OptimizerState:
    """Adam 状态：一阶/二阶矩与步数"""
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: OptimizerState,
    lr: float,
) -> None:
    """一次带偏差校正的 Adam 更新（原地替换参数数据）

    Args:
        params: 参数列表（须有唯一 name）
        grads: 对应梯度，None 视为零梯度
        state: 优化器状态
        lr: 学习率
    """
    if len(params) != len(grads):
        raise ShapeError(
            f"{len(params)} parameters but {len(grads)} gradients",
            primitive="adam",
            dims=[len(params), len(grads)],
        )

    for index, (param, grad) in enumerate(zip(params, grads)):
        if grad is not None and not np.all(np.isfinite(grad)):
            raise NonFiniteError(
                f"non-finite gradient for parameter '{param.name or index}'",
                name=param.name,
                step=state.step + 1,
            )

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for index, (param, grad) in enumerate(zip(params, grads)):
        key = param.name or str(index)
        if grad is None:
            grad = np.zeros_like(param.data)
        elif grad.shape != param.data.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match parameter '{key}' {param.data.shape}",
                primitive="adam",
                dims=[grad.shape, param.data.shape],
            )
        m = state.first_moment.get(key)
        v = state.second_moment.get(key)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[key] = m
        state.second_moment[key] = v
        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """对一组参数执行 Adam 更新的便捷封装"""

    def __init__(
        self,
        params: Sequence[Tensor],
        beta1: float = 0.9,
        beta2: float = 0.98,
        eps: float = 1e-9,
    ):
        self.params: List[Tensor] = list(params)
        self.state = OptimizerState(beta1=beta1, beta2=beta2, eps=eps)

    def step(self, lr: float) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state, lr)

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None
