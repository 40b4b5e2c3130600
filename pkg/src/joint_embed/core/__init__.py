"""数值核心模块"""

from .tensor import (
    Parameter,
    Tape,
    Tensor,
    backward,
    current_tape,
    eval_mode,
    inference_mode,
    is_eval_mode,
    no_grad,
    primitive_forward,
    set_dropout_stream,
    set_eval_mode,
)
from .optim import Adam, LossWeights, LrSchedule, OptimizerState, adam_step, lr_at_step
from .functional import (
    cross_entropy_label_smoothed,
    l2_normalize,
    l2_pair_loss,
    mean_pool_masked,
    total_loss,
)
from .gradcheck import GradCheckResult, grad_check, relative_error

__all__ = [
    "Tensor",
    "Parameter",
    "Tape",
    "backward",
    "current_tape",
    "eval_mode",
    "inference_mode",
    "is_eval_mode",
    "no_grad",
    "primitive_forward",
    "set_dropout_stream",
    "set_eval_mode",
    "Adam",
    "LossWeights",
    "LrSchedule",
    "OptimizerState",
    "adam_step",
    "lr_at_step",
    "cross_entropy_label_smoothed",
    "l2_normalize",
    "l2_pair_loss",
    "mean_pool_masked",
    "total_loss",
    "GradCheckResult",
    "grad_check",
    "relative_error",
]
