"""网络层

Module 基类负责参数命名与状态字典；其余为 Transformer 编码/解码所需的层。
"""

import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..core import functional as F
from ..core.tensor import MASK_VALUE, Parameter, Tensor, conv_output_length
from ..exceptions import CheckpointError


class Module:
    """参数容器基类

    属性中的 Parameter、Module 以及 Module 列表会被递归收集，
    名称按属性路径以点号连接。
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{index}.")

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix.rstrip("."), self
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, Module):
                yield from value.named_modules(path + ".")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_modules(f"{path}.{index}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self, prefix: str) -> None:
        """给参数写入全名，并为 dropout 层生成稳定编号"""
        for name, param in self.named_parameters(prefix):
            param.name = name
        for path, module in self.named_modules(prefix):
            if isinstance(module, Dropout):
                module.layer_id = F.layer_key(path)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(
        self, state: Dict[str, np.ndarray], strict: bool = True
    ) -> None:
        """载入参数；形状不符时报出第一个不匹配的参数"""
        for name, param in self.named_parameters():
            if name not in state:
                if strict:
                    raise CheckpointError(
                        f"missing parameter '{name}'", parameter=name
                    )
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.data.shape:
                raise CheckpointError(
                    f"shape mismatch for '{name}': "
                    f"checkpoint {value.shape} vs model {param.data.shape}",
                    parameter=name,
                )
            param.data = value.copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def xavier_uniform(
    rng: np.random.Generator, fan_in: int, fan_out: int, shape: Tuple[int, ...]
) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(
        self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True
    ):
        self.weight = Parameter(xavier_uniform(rng, in_dim, out_dim, (in_dim, out_dim)))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias, self.eps)


class Dropout(Module):
    def __init__(self, rate: float):
        self.rate = rate
        self.layer_id = 0

    def forward(self, x: Tensor) -> Tensor:
        if self.rate == 0.0:
            return x
        return F.dropout(x, self.rate, self.layer_id)


class Embedding(Module):
    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, dim ** -0.5, size=(vocab_size, dim)))

    def forward(self, ids: np.ndarray) -> Tensor:
        return F.embedding(self.weight, ids)


class Conv1d(Module):
    """时间轴卷积，padding = kernel // 2"""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int,
        rng: np.random.Generator,
    ):
        shape = (kernel, in_channels, out_channels)
        self.weight = Parameter(
            xavier_uniform(rng, in_channels * kernel, out_channels, shape)
        )
        self.bias = Parameter(np.zeros(out_channels))
        self.kernel = kernel
        self.stride = stride
        self.padding = kernel // 2

    def output_length(self, length: int) -> int:
        return conv_output_length(length, self.kernel, self.stride, self.padding)

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """固定正弦位置编码 [length, dim]"""
    positions = np.arange(length)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: dim // 2])
    return table


def key_padding_bias(mask: np.ndarray) -> np.ndarray:
    """[B, T] 有效掩码 → [B, 1, 1, T] 注意力偏置"""
    return np.where(mask, 0.0, MASK_VALUE)[:, None, None, :]


def causal_bias(length: int) -> np.ndarray:
    """[1, 1, T, T] 因果偏置，只允许关注自身及之前的位置"""
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(upper, MASK_VALUE, 0.0)[None, None, :, :]


class MultiHeadAttention(Module):
    def __init__(
        self, dim: int, n_heads: int, dropout_rate: float, rng: np.random.Generator
    ):
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)
        self.attn_dropout = Dropout(dropout_rate)

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        heads = x.reshape(batch, length, self.n_heads, self.head_dim)
        return heads.transpose(0, 2, 1, 3)

    def forward(
        self,
        x: Tensor,
        memory: Optional[Tensor] = None,
        bias: Optional[np.ndarray] = None,
    ) -> Tensor:
        source = x if memory is None else memory
        q = self._split(self.q_proj(x))
        k = self._split(self.k_proj(source))
        v = self._split(self.v_proj(source))
        scores = (q @ k.swap_last()) * (1.0 / math.sqrt(self.head_dim))
        if bias is not None:
            scores = scores + bias
        weights = self.attn_dropout(F.softmax(scores))
        context = weights @ v
        batch, _, length, _ = context.shape
        merged = context.transpose(0, 2, 1, 3).reshape(
            batch, length, self.n_heads * self.head_dim
        )
        return self.out_proj(merged)


class FeedForward(Module):
    def __init__(
        self, dim: int, ffn_dim: int, dropout_rate: float, rng: np.random.Generator
    ):
        self.fc1 = Linear(dim, ffn_dim, rng)
        self.fc2 = Linear(ffn_dim, dim, rng)
        self.dropout = Dropout(dropout_rate)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(self.dropout(F.gelu(self.fc1(x))))


class EncoderLayer(Module):
    """前置归一化的 Transformer 编码层"""

    def __init__(
        self,
        dim: int,
        n_heads: int,
        ffn_dim: int,
        dropout_rate: float,
        rng: np.random.Generator,
    ):
        self.attn_norm = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, n_heads, dropout_rate, rng)
        self.attn_dropout = Dropout(dropout_rate)
        self.ffn_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, dropout_rate, rng)
        self.ffn_dropout = Dropout(dropout_rate)

    def forward(self, x: Tensor, bias: Optional[np.ndarray]) -> Tensor:
        x = x + self.attn_dropout(self.attn(self.attn_norm(x), bias=bias))
        return x + self.ffn_dropout(self.ffn(self.ffn_norm(x)))


class DecoderLayer(Module):
    """因果自注意力 + 编码器交叉注意力 + 前馈"""

    def __init__(
        self,
        dim: int,
        n_heads: int,
        ffn_dim: int,
        dropout_rate: float,
        rng: np.random.Generator,
    ):
        self.self_norm = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, n_heads, dropout_rate, rng)
        self.self_dropout = Dropout(dropout_rate)
        self.cross_norm = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, n_heads, dropout_rate, rng)
        self.cross_dropout = Dropout(dropout_rate)
        self.ffn_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, dropout_rate, rng)
        self.ffn_dropout = Dropout(dropout_rate)

    def forward(
        self,
        x: Tensor,
        memory: Tensor,
        self_bias: np.ndarray,
        memory_bias: np.ndarray,
    ) -> Tensor:
        x = x + self.self_dropout(self.self_attn(self.self_norm(x), bias=self_bias))
        attended = self.cross_attn(self.cross_norm(x), memory=memory, bias=memory_bias)
        x = x + self.cross_dropout(attended)
        return x + self.ffn_dropout(self.ffn(self.ffn_norm(x)))
