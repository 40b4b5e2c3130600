"""有限差分梯度校验

用中心差分对比解析梯度，作为所有原语和端到端损失的数值预言机。
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence

import numpy as np

from .tensor import Tensor, backward, current_tape, eval_mode, no_grad

ABSOLUTE_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    """梯度校验结果"""
    max_relative_error: float
    per_tensor: Dict[str, float] = field(default_factory=dict)

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error < tolerance


def relative_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = ABSOLUTE_FLOOR
) -> float:
    """‖a − n‖ / (‖a‖ + ‖n‖)

    两个梯度的范数和低于 floor 时（真实梯度为零，例如注意力键偏置）改为返回绝对误差 ‖a − n‖。
    """
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    if scale < floor:
        return diff
    return diff / scale


def numerical_gradient(
    fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-5
) -> np.ndarray:
    """对 tensor 的每个元素做中心差分"""
    tensor.data = np.ascontiguousarray(tensor.data)
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = fn().item()
            flat[i] = original - h
            minus = fn().item()
            flat[i] = original
            grad.reshape(-1)[i] = (plus - minus) / (2.0 * h)
    return grad


def grad_check(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-5,
    floor: float = ABSOLUTE_FLOOR,
) -> GradCheckResult:
    """在 eval 模式下比较解析梯度与中心差分

    Args:
        fn: 无参函数，返回标量损失
        tensors: 需要校验的叶子张量
        h: 差分步长
        floor: 绝对误差下限，见 relative_error

    Returns:
        GradCheckResult: 每个张量的相对误差
    """
    with eval_mode(True):
        current_tape().clear()
        for tensor in tensors:
            tensor.grad = None
        backward(fn())
        result = GradCheckResult(max_relative_error=0.0)
        for index, tensor in enumerate(tensors):
            analytic = tensor.grad
            if analytic is None:
                analytic = np.zeros_like(tensor.data)
            numeric = numerical_gradient(fn, tensor, h)
            err = relative_error(analytic, numeric, floor)
            result.per_tensor[tensor.name or f"tensor_{index}"] = err
            result.max_relative_error = max(result.max_relative_error, err)
    return result
