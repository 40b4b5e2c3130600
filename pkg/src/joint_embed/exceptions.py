"""JointEmbed异常类模块

提供统一的错误分类、错误上下文与错误记录机制。
数值引擎、模型、数据生成、训练与评估各自抛出带分类的异常，
实验矩阵通过 ErrorHandler 记录失败单元而不中断其余单元。
"""

from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union


class ErrorSeverity(Enum):
    """错误严重程度枚举"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """错误分类枚举"""
    SHAPE = "shape"                  # 张量形状不匹配
    NUMERIC = "numeric"              # 非有限数值、退化向量
    CONFIGURATION = "configuration"  # 配置错误
    CHECKPOINT = "checkpoint"        # 检查点读写错误
    DATA = "data"                    # 合成数据生成错误
    TRAINING = "training"            # 训练过程错误
    EVALUATION = "evaluation"        # 评估过程错误
    SYSTEM = "system"                # 系统级错误


class ErrorContext:
    """错误上下文信息"""

    def __init__(
        self,
        operation: Optional[str] = None,
        component: Optional[str] = None,
        data: Optional[Dict[str, Any]] = None,
        timestamp: Optional[datetime] = None,
    ):
        self.operation = operation
        self.component = component
        self.data = data or {}
        self.timestamp = timestamp or datetime.now()

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        return {
            "operation": self.operation,
            "component": self.component,
            "data": self.data,
            "timestamp": self.timestamp.isoformat(),
        }


class JointEmbedError(Exception):
    """JointEmbed基础异常类

    所有JointEmbed相关异常的基类，提供统一的错误处理接口。
    """

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.SYSTEM,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        context: Optional[ErrorContext] = None,
        cause: Optional[Exception] = None,
        recoverable: bool = False,
        error_code: Optional[str] = None,
    ):
        super().__init__(message)
        self.message = message
        self.category = category
        self.severity = severity
        self.context = context or ErrorContext()
        self.cause = cause
        self.recoverable = recoverable
        self.timestamp = datetime.now()
        default_code = f"{category.value.upper()}_{severity.value.upper()}"
        self.error_code = error_code or default_code

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式，便于日志记录和报告输出"""
        return {
            "error_code": self.error_code,
            "message": self.message,
            "category": self.category.value,
            "severity": self.severity.value,
            "recoverable": self.recoverable,
            "timestamp": self.timestamp.isoformat(),
            "context": self.context.to_dict() if self.context else None,
            "cause": str(self.cause) if self.cause else None,
        }

    def __str__(self) -> str:
        return f"[{self.error_code}] {self.category.value.title()}: {self.message}"


class ShapeError(JointEmbedError):
    """张量形状不符合原语规则"""

    def __init__(
        self,
        message: str,
        primitive: Optional[str] = None,
        dims: Optional[Sequence[Any]] = None,
        **kwargs,
    ):
        if primitive is not None:
            message = f"{primitive}: {message}"
        super().__init__(message, category=ErrorCategory.SHAPE, **kwargs)
        self.primitive = primitive
        self.dims = list(dims) if dims is not None else []


class NonFiniteError(JointEmbedError):
    """出现 NaN/Inf 的损失或梯度"""

    def __init__(
        self,
        message: str,
        name: Optional[str] = None,
        step: Optional[int] = None,
        **kwargs,
    ):
        super().__init__(
            message,
            category=ErrorCategory.NUMERIC,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )
        self.name = name
        self.step = step


class DegenerateEmbeddingError(JointEmbedError):
    """范数过小无法单位化的嵌入"""

    def __init__(self, norm: float, **kwargs):
        super().__init__(
            f"degenerate embedding (norm={norm:.3e})",
            category=ErrorCategory.NUMERIC,
            **kwargs,
        )
        self.norm = norm


class EmptyPoolingError(JointEmbedError):
    """掩码全为假时的均值池化"""

    def __init__(self, row: Optional[int] = None, **kwargs):
        suffix = f" (row {row})" if row is not None else ""
        super().__init__(
            f"empty pooling window{suffix}",
            category=ErrorCategory.SHAPE,
            **kwargs,
        )
        self.row = row


class ConfigurationError(JointEmbedError):
    """配置错误"""

    def __init__(
        self,
        message: str,
        config_key: Optional[str] = None,
        config_value: Optional[Any] = None,
        **kwargs,
    ):
        super().__init__(
            message,
            category=ErrorCategory.CONFIGURATION,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )
        self.config_key = config_key
        self.config_value = config_value


class CheckpointError(JointEmbedError):
    """检查点格式或形状不兼容"""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        parameter: Optional[str] = None,
        **kwargs,
    ):
        super().__init__(
            message,
            category=ErrorCategory.CHECKPOINT,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )
        self.path = path
        self.parameter = parameter


class DataGenerationError(JointEmbedError):
    """合成数据生成失败（参数非法或超出组合容量）"""

    def __init__(self, message: str, generator: Optional[str] = None, **kwargs):
        super().__init__(message, category=ErrorCategory.DATA, **kwargs)
        self.generator = generator


class TrainingError(JointEmbedError):
    """训练过程错误（发散、场景不一致）"""

    def __init__(
        self,
        message: str,
        scenario_id: Optional[str] = None,
        step: Optional[int] = None,
        **kwargs,
    ):
        kwargs.setdefault("severity", ErrorSeverity.HIGH)
        super().__init__(message, category=ErrorCategory.TRAINING, **kwargs)
        self.scenario_id = scenario_id
        self.step = step


class FrozenParameterDriftError(TrainingError):
    """冻结参数在训练中被修改（内部断言）"""

    def __init__(self, group: str, **kwargs):
        super().__init__(
            f"frozen parameter group '{group}' changed during training",
            severity=ErrorSeverity.CRITICAL,
            **kwargs,
        )
        self.group = group


class MissingDecoderError(JointEmbedError):
    """需要解码器的操作缺少解码器"""

    def __init__(self, **kwargs):
        super().__init__(
            "scenario lacks decoder",
            category=ErrorCategory.CONFIGURATION,
            **kwargs,
        )


class EvaluationError(JointEmbedError):
    """评估输入非法"""

    def __init__(self, message: str, instrument: Optional[str] = None, **kwargs):
        super().__init__(message, category=ErrorCategory.EVALUATION, **kwargs)
        self.instrument = instrument


class ErrorHandler:
    """错误处理器

    记录失败并提供摘要，供实验矩阵标记失败单元。
    """

    def __init__(self, max_history: int = 1000):
        self.max_history = max_history
        self.error_history: List[JointEmbedError] = []

    def handle_error(
        self,
        error: Union[Exception, JointEmbedError],
        context: Optional[ErrorContext] = None,
    ) -> JointEmbedError:
        """记录错误并返回规范化后的异常对象

        Args:
            error: 错误对象
            context: 错误上下文

        Returns:
            JointEmbedError: 规范化的异常
        """
        if not isinstance(error, JointEmbedError):
            error = JointEmbedError(message=str(error), context=context, cause=error)
        elif context is not None:
            error.context = context

        self.error_history.append(error)
        if len(self.error_history) > self.max_history:
            self.error_history = self.error_history[-self.max_history:]
        return error

    def get_error_summary(self) -> Dict[str, Any]:
        """获取错误摘要

        Returns:
            Dict[str, Any]: 错误统计信息
        """
        if not self.error_history:
            return {"total_errors": 0}

        summary: Dict[str, Any] = {
            "total_errors": len(self.error_history),
            "by_category": {},
            "by_severity": {},
            "recent_errors": [],
        }
        for error in self.error_history:
            category = error.category.value
            by_category = summary["by_category"]
            by_category[category] = by_category.get(category, 0) + 1
            severity = error.severity.value
            by_severity = summary["by_severity"]
            by_severity[severity] = by_severity.get(severity, 0) + 1

        summary["recent_errors"] = [e.to_dict() for e in self.error_history[-10:]]
        return summary

    def clear_history(self) -> None:
        """清空错误历史"""
        self.error_history.clear()


def create_error_context(
    operation: Optional[str] = None,
    component: Optional[str] = None,
    **data: Any,
) -> ErrorContext:
    """创建错误上下文的便捷函数

    Args:
        operation: 操作名称
        component: 组件名称
        **data: 额外的上下文数据

    Returns:
        ErrorContext: 错误上下文对象
    """
    return ErrorContext(operation=operation, component=component, data=data)
