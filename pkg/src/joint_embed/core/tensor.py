"""张量与反向模式自动微分引擎

提供稠密 fp64 张量、记录原语应用的计算带（Tape）、原语注册表，
以及 eval/no-grad 等线程局部运行状态。所有模型与损失都在此基础上计算。
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Type,
    Union,
)

import numpy as np
from scipy.special import erf

from ..exceptions import (
    ConfigurationError,
    DegenerateEmbeddingError,
    EmptyPoolingError,
    JointEmbedError,
    ShapeError,
)

DTYPE = np.float64
NORM_TOLERANCE = 1e-12
MASK_VALUE = -1e9

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


class Tensor:
    """参与反向模式微分的稠密张量"""

    __slots__ = ("data", "requires_grad", "grad", "name", "frozen")

    def __init__(
        self, data: Any, requires_grad: bool = False, name: Optional[str] = None
    ):
        self.data: np.ndarray = np.asarray(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.frozen = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def freeze(self) -> None:
        """冻结：不再接收梯度"""
        self.frozen = True
        self.requires_grad = False
        self.grad = None

    def unfreeze(self) -> None:
        self.frozen = False
        self.requires_grad = True

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # 运算符重载
    def __add__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("add", (self, other))

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("add", (other, self))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("sub", (self, other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("sub", (other, self))

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("mul", (self, other))

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("mul", (other, self))

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("div", (self, other))

    def __neg__(self) -> "Tensor":
        return primitive_forward("mul", (self, -1.0))

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        return primitive_forward("matmul", (self, other))

    def __getitem__(self, index: Any) -> "Tensor":
        return primitive_forward("index", (self,), {"index": index})

    def sum(
        self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False
    ) -> "Tensor":
        return primitive_forward("sum", (self,), {"axis": axis, "keepdims": keepdims})

    def mean(
        self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False
    ) -> "Tensor":
        return primitive_forward("mean", (self,), {"axis": axis, "keepdims": keepdims})

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return primitive_forward("reshape", (self,), {"shape": tuple(shape)})

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return primitive_forward("transpose", (self,), {"axes": tuple(axes)})

    def swap_last(self) -> "Tensor":
        """交换最后两个维度"""
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(tuple(axes))


class Parameter(Tensor):
    """可训练参数（叶子张量）"""

    __slots__ = ()

    def __init__(self, data: Any, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


def as_tensor(value: ArrayLike) -> Tensor:
    """把常量包装成不需要梯度的张量"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


# ---------------------------------------------------------------------------
# 计算带与运行状态
# ---------------------------------------------------------------------------

@dataclass
class TapeEntry:
    """一次原语应用的记录"""
    kind: str
    output: Tensor
    operands: Tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tape:
    """按拓扑顺序记录的原语应用列表"""

    def __init__(self) -> None:
        self.entries: List[TapeEntry] = []

    def record(self, entry: TapeEntry) -> None:
        self.entries.append(entry)

    def clear(self) -> None:
        self.entries.clear()

    def __len__(self) -> int:
        return len(self.entries)


class _RuntimeState(threading.local):
    """线程局部运行状态：计算带、eval 标志、dropout 随机流坐标"""

    def __init__(self) -> None:
        self.tape = Tape()
        self.eval_mode = False
        self.grad_enabled = True
        self.dropout_seed = 0
        self.dropout_step = 0


_state = _RuntimeState()


def current_tape() -> Tape:
    return _state.tape


def is_eval_mode() -> bool:
    return _state.eval_mode


def set_eval_mode(flag: bool) -> None:
    _state.eval_mode = bool(flag)


def is_grad_enabled() -> bool:
    return _state.grad_enabled


@contextmanager
def eval_mode(flag: bool = True) -> Iterator[None]:
    """临时切换 eval 模式（dropout 恒等）"""
    previous = _state.eval_mode
    _state.eval_mode = flag
    try:
        yield
    finally:
        _state.eval_mode = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """临时关闭计算带记录"""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def inference_mode() -> Iterator[None]:
    """只读推理：eval 模式 + 不记录计算带，可在多线程中并发使用"""
    with eval_mode(True), no_grad():
        yield


def set_dropout_stream(seed: int, step: int) -> None:
    """设置 dropout 计数器随机流的 (seed, step) 坐标"""
    _state.dropout_seed = int(seed)
    _state.dropout_step = int(step)


# ---------------------------------------------------------------------------
# 原语注册表
# ---------------------------------------------------------------------------

class Primitive:
    """原语基类：forward 返回 (输出, ctx)，backward 返回每个操作数的梯度"""

    name: str = ""

    @staticmethod
    def forward(attrs: Dict[str, Any], *arrays: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    @staticmethod
    def backward(
        attrs: Dict[str, Any], ctx: Any, grad: np.ndarray, *arrays: np.ndarray
    ) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


PRIMITIVES: Dict[str, Type[Primitive]] = {}


def register_primitive(cls: Type[Primitive]) -> Type[Primitive]:
    """注册原语类"""
    PRIMITIVES[cls.name] = cls
    return cls


def primitive_forward(
    kind: str,
    operands: Sequence[ArrayLike],
    attrs: Optional[Dict[str, Any]] = None,
) -> Tensor:
    """执行一个原语，必要时记录到当前计算带

    Args:
        kind: 原语名称
        operands: 操作数（常量会被包装为张量）
        attrs: 原语属性

    Returns:
        Tensor: 结果张量
    """
    prim = PRIMITIVES.get(kind)
    if prim is None:
        raise JointEmbedError(f"unknown primitive '{kind}'")
    attrs = dict(attrs or {})
    tensors = tuple(as_tensor(o) for o in operands)
    arrays = tuple(t.data for t in tensors)

    out_data, ctx = prim.forward(attrs, *arrays)
    needs_grad = _state.grad_enabled and any(t.requires_grad for t in tensors)
    out = Tensor(out_data, requires_grad=needs_grad)
    if needs_grad:
        def backward_fn(grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
            return prim.backward(attrs, ctx, grad, *arrays)

        _state.tape.record(TapeEntry(kind, out, tensors, backward_fn))
    return out


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """从标量损失反向传播，把梯度累加到所有需要梯度的叶子上，然后清空计算带

    Args:
        loss: 标量损失
        tape: 计算带，默认当前线程的计算带
    """
    tape = tape if tape is not None else _state.tape
    if loss.data.size != 1:
        raise ShapeError(
            f"backward on non-scalar of shape {loss.shape}",
            primitive="backward",
            dims=loss.shape,
        )

    produced = {id(entry.output) for entry in tape.entries}
    if id(loss) not in produced and not loss.requires_grad:
        tape.clear()
        raise JointEmbedError(
            "loss was not produced on this tape and does not require grad"
        )

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}
    if id(loss) not in produced:
        leaves[id(loss)] = loss

    for entry in reversed(tape.entries):
        grad = grads.pop(id(entry.output), None)
        if grad is None:
            continue
        operand_grads = entry.backward(grad)
        for operand, operand_grad in zip(entry.operands, operand_grads):
            if operand_grad is None or not operand.requires_grad:
                continue
            key = id(operand)
            if key in grads:
                grads[key] = grads[key] + operand_grad
            else:
                grads[key] = operand_grad
            if key not in produced:
                leaves[key] = operand

    for key, leaf in leaves.items():
        if leaf.frozen or not leaf.requires_grad:
            continue
        grad = grads.get(key)
        if grad is None:
            continue
        leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad

    tape.clear()


# ---------------------------------------------------------------------------
# 原语实现
# ---------------------------------------------------------------------------

def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"operands {a.shape} and {b.shape} are not broadcastable",
            primitive=kind,
            dims=[a.shape, b.shape],
        ) from None


@register_primitive
class Add(Primitive):
    name = "add"

    @staticmethod
    def forward(attrs, a, b):
        _broadcast_shape("add", a, b)
        return a + b, None

    @staticmethod
    def backward(attrs, ctx, grad, a, b):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)


@register_primitive
class Sub(Primitive):
    name = "sub"

    @staticmethod
    def forward(attrs, a, b):
        _broadcast_shape("sub", a, b)
        return a - b, None

    @staticmethod
    def backward(attrs, ctx, grad, a, b):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)


@register_primitive
class Mul(Primitive):
    name = "mul"

    @staticmethod
    def forward(attrs, a, b):
        _broadcast_shape("mul", a, b)
        return a * b, None

    @staticmethod
    def backward(attrs, ctx, grad, a, b):
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


@register_primitive
class Div(Primitive):
    name = "div"

    @staticmethod
    def forward(attrs, a, b):
        _broadcast_shape("div", a, b)
        return a / b, None

    @staticmethod
    def backward(attrs, ctx, grad, a, b):
        grad_b = -grad * a / (b * b)
        return _unbroadcast(grad / b, a.shape), _unbroadcast(grad_b, b.shape)


@register_primitive
class MatMul(Primitive):
    name = "matmul"

    @staticmethod
    def forward(attrs, a, b):
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(
                f"operands must be at least 2-D, got {a.shape} and {b.shape}",
                primitive="matmul",
                dims=[a.shape, b.shape],
            )
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(
                f"inner dimensions differ: {a.shape[-1]} vs {b.shape[-2]}",
                primitive="matmul",
                dims=[a.shape, b.shape],
            )
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError:
            raise ShapeError(
                f"batch dimensions {a.shape[:-2]} and {b.shape[:-2]} are not broadcastable",
                primitive="matmul",
                dims=[a.shape, b.shape],
            ) from None
        return np.matmul(a, b), None

    @staticmethod
    def backward(attrs, ctx, grad, a, b):
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)


def _normalize_axes(axis: Any, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


@register_primitive
class Sum(Primitive):
    name = "sum"

    @staticmethod
    def forward(attrs, a):
        keepdims = attrs.get("keepdims", False)
        return np.sum(a, axis=attrs.get("axis"), keepdims=keepdims), None

    @staticmethod
    def backward(attrs, ctx, grad, a):
        axes = _normalize_axes(attrs.get("axis"), a.ndim)
        if not attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, a.shape).copy(),)


@register_primitive
class Mean(Primitive):
    name = "mean"

    @staticmethod
    def forward(attrs, a):
        keepdims = attrs.get("keepdims", False)
        return np.mean(a, axis=attrs.get("axis"), keepdims=keepdims), None

    @staticmethod
    def backward(attrs, ctx, grad, a):
        axes = _normalize_axes(attrs.get("axis"), a.ndim)
        count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
        if not attrs.get("keepdims", False):
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, a.shape) / count,)


@register_primitive
class Reshape(Primitive):
    name = "reshape"

    @staticmethod
    def forward(attrs, a):
        shape = attrs["shape"]
        try:
            return a.reshape(shape), None
        except ValueError:
            raise ShapeError(
                f"cannot reshape {a.shape} into {shape}",
                primitive="reshape",
                dims=[a.shape, shape],
            ) from None

    @staticmethod
    def backward(attrs, ctx, grad, a):
        return (grad.reshape(a.shape),)


@register_primitive
class Transpose(Primitive):
    name = "transpose"

    @staticmethod
    def forward(attrs, a):
        axes = attrs["axes"]
        if sorted(axes) != list(range(a.ndim)):
            raise ShapeError(
                f"axes {axes} do not permute a {a.ndim}-D tensor",
                primitive="transpose",
                dims=[a.shape],
            )
        return np.transpose(a, axes), None

    @staticmethod
    def backward(attrs, ctx, grad, a):
        return (np.transpose(grad, np.argsort(attrs["axes"])),)


@register_primitive
class Index(Primitive):
    name = "index"

    @staticmethod
    def forward(attrs, a):
        try:
            return np.array(a[attrs["index"]], dtype=DTYPE), None
        except IndexError as exc:
            raise ShapeError(str(exc), primitive="index", dims=[a.shape]) from None

    @staticmethod
    def backward(attrs, ctx, grad, a):
        out = np.zeros_like(a)
        np.add.at(out, attrs["index"], grad)
        return (out,)


_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@register_primitive
class Gelu(Primitive):
    """精确 GELU：x·Φ(x)"""
    name = "gelu"

    @staticmethod
    def forward(attrs, a):
        cdf = 0.5 * (1.0 + erf(a / _SQRT_2))
        return a * cdf, cdf

    @staticmethod
    def backward(attrs, ctx, grad, a):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a * a)
        return (grad * (ctx + a * pdf),)


@register_primitive
class Tanh(Primitive):
    name = "tanh"

    @staticmethod
    def forward(attrs, a):
        out = np.tanh(a)
        return out, out

    @staticmethod
    def backward(attrs, ctx, grad, a):
        return (grad * (1.0 - ctx * ctx),)


@register_primitive
class Softmax(Primitive):
    name = "softmax"

    @staticmethod
    def forward(attrs, a):
        axis = attrs.get("axis", -1)
        shifted = a - np.max(a, axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / np.sum(e, axis=axis, keepdims=True)
        return out, out

    @staticmethod
    def backward(attrs, ctx, grad, a):
        axis = attrs.get("axis", -1)
        return (ctx * (grad - np.sum(grad * ctx, axis=axis, keepdims=True)),)


@register_primitive
class LogSoftmax(Primitive):
    name = "log_softmax"

    @staticmethod
    def forward(attrs, a):
        axis = attrs.get("axis", -1)
        shifted = a - np.max(a, axis=axis, keepdims=True)
        log_norm = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
        out = shifted - log_norm
        return out, np.exp(out)

    @staticmethod
    def backward(attrs, ctx, grad, a):
        axis = attrs.get("axis", -1)
        return (grad - ctx * np.sum(grad, axis=axis, keepdims=True),)


@register_primitive
class LayerNorm(Primitive):
    """最后一维上的层归一化，操作数 (x, gain, bias)"""
    name = "layer_norm"

    @staticmethod
    def forward(attrs, x, gain, bias):
        dim = x.shape[-1]
        if gain.shape != (dim,) or bias.shape != (dim,):
            raise ShapeError(
                f"gain {gain.shape} / bias {bias.shape} must be ({dim},)",
                primitive="layer_norm",
                dims=[x.shape, gain.shape, bias.shape],
            )
        eps = attrs.get("eps", 1e-5)
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu) * inv_std
        return xhat * gain + bias, (xhat, inv_std)

    @staticmethod
    def backward(attrs, ctx, grad, x, gain, bias):
        xhat, inv_std = ctx
        dim = x.shape[-1]
        dxhat = grad * gain
        dx = (inv_std / dim) * (
            dim * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return dx, (grad * xhat).sum(axis=lead), grad.sum(axis=lead)


@register_primitive
class Dropout(Primitive):
    """计数器随机流 dropout，随机流由 (seed, layer_id, step) 决定；eval 模式下恒等"""
    name = "dropout"

    @staticmethod
    def forward(attrs, a):
        rate = attrs.get("rate", 0.0)
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(
                f"dropout rate must be in [0, 1), got {rate}",
                config_key="dropout_rate",
                config_value=rate,
            )
        if attrs.get("eval", False) or rate == 0.0:
            return a.copy(), None
        seq = np.random.SeedSequence([attrs["seed"], attrs["layer_id"], attrs["step"]])
        rng = np.random.Generator(np.random.Philox(seq))
        keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
        return a * keep, keep

    @staticmethod
    def backward(attrs, ctx, grad, a):
        return (grad if ctx is None else grad * ctx,)


@register_primitive
class Embedding(Primitive):
    """按 id 查表，操作数 (weight,)，属性 ids"""
    name = "embedding"

    @staticmethod
    def forward(attrs, weight):
        ids = np.asarray(attrs["ids"], dtype=np.int64)
        vocab = weight.shape[0]
        if ids.size and (ids.min() < 0 or ids.max() >= vocab):
            raise ShapeError(
                f"token id out of range [0, {vocab})",
                primitive="embedding",
                dims=[weight.shape, int(ids.max())],
            )
        return weight[ids], ids

    @staticmethod
    def backward(attrs, ctx, grad, weight):
        out = np.zeros_like(weight)
        np.add.at(out, ctx.reshape(-1), grad.reshape(-1, weight.shape[1]))
        return (out,)


def conv_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    """一维卷积输出长度（精确步长算术）"""
    return (length + 2 * padding - kernel) // stride + 1


@register_primitive
class Conv1d(Primitive):
    """沿时间轴的一维卷积，操作数 (x[B,T,C], w[K,C,O], b[O])"""
    name = "conv1d"

    @staticmethod
    def forward(attrs, x, w, b):
        stride = attrs.get("stride", 1)
        padding = attrs.get("padding", 0)
        well_formed = x.ndim == 3 and w.ndim == 3 and x.shape[2] == w.shape[1]
        if not well_formed or b.shape != (w.shape[2],):
            raise ShapeError(
                f"expected x[B,T,C], w[K,C,O], b[O]; got {x.shape}, {w.shape}, {b.shape}",
                primitive="conv1d",
                dims=[x.shape, w.shape, b.shape],
            )
        batch, length, channels = x.shape
        kernel, _, out_channels = w.shape
        out_len = conv_output_length(length, kernel, stride, padding)
        if out_len < 1:
            raise ShapeError(
                f"input shorter than receptive field ({length} < {kernel - 2 * padding})",
                primitive="conv1d",
                dims=[x.shape, w.shape],
            )
        xp = np.pad(x, ((0, 0), (padding, padding), (0, 0)))
        idx = np.arange(out_len)[:, None] * stride + np.arange(kernel)[None, :]
        cols = xp[:, idx, :].reshape(batch, out_len, kernel * channels)
        out = cols @ w.reshape(kernel * channels, out_channels) + b
        return out, (cols, idx, xp.shape)

    @staticmethod
    def backward(attrs, ctx, grad, x, w, b):
        cols, idx, padded_shape = ctx
        padding = attrs.get("padding", 0)
        kernel, channels, out_channels = w.shape
        batch, out_len, _ = grad.shape
        grad_w = np.tensordot(cols, grad, axes=([0, 1], [0, 1]))
        grad_w = grad_w.reshape(kernel, channels, out_channels)
        grad_b = grad.sum(axis=(0, 1))
        grad_cols = grad @ w.reshape(kernel * channels, out_channels).T
        grad_cols = grad_cols.reshape(batch, out_len, kernel, channels)
        grad_xp = np.zeros(padded_shape, dtype=DTYPE)
        np.add.at(grad_xp, (slice(None), idx), grad_cols)
        grad_x = grad_xp[:, padding:padding + x.shape[1], :]
        return grad_x, grad_w, grad_b


@register_primitive
class MeanPoolMasked(Primitive):
    """时间轴掩码均值池化，操作数 (states[...,T,D],)，属性 mask[...,T]"""
    name = "mean_pool_masked"

    @staticmethod
    def forward(attrs, states):
        mask = np.asarray(attrs["mask"], dtype=bool)
        if states.ndim < 2 or mask.shape != states.shape[:-1]:
            raise ShapeError(
                f"mask {mask.shape} does not match states {states.shape}",
                primitive="mean_pool_masked",
                dims=[states.shape, mask.shape],
            )
        counts = mask.sum(axis=-1)
        if np.any(counts == 0):
            empty = np.argwhere(counts.reshape(-1) == 0)
            raise EmptyPoolingError(row=int(empty[0][0]))
        weights = mask.astype(DTYPE) / counts[..., None]
        out = (states * weights[..., None]).sum(axis=-2)
        return out, weights

    @staticmethod
    def backward(attrs, ctx, grad, states):
        return (grad[..., None, :] * ctx[..., None],)


@register_primitive
class L2Normalize(Primitive):
    """最后一维单位化"""
    name = "l2_normalize"

    @staticmethod
    def forward(attrs, v):
        norm = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
        smallest = float(norm.min()) if norm.size else 0.0
        if smallest < attrs.get("tolerance", NORM_TOLERANCE):
            raise DegenerateEmbeddingError(smallest)
        out = v / norm
        return out, (out, norm)

    @staticmethod
    def backward(attrs, ctx, grad, v):
        out, norm = ctx
        return ((grad - out * np.sum(grad * out, axis=-1, keepdims=True)) / norm,)
