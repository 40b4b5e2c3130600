"""ASR 目标使用的 Transformer 解码器（输出层与输入嵌入共享权重）"""

import math

import numpy as np

from ..core.tensor import Tensor
from ..exceptions import ShapeError
from ..types.configs import DecoderConfig
from .layers import (
    DecoderLayer,
    Dropout,
    Embedding,
    LayerNorm,
    Module,
    causal_bias,
    key_padding_bias,
    sinusoidal_positions,
)


class Decoder(Module):
    def __init__(self, config: DecoderConfig, rng: np.random.Generator):
        self.config = config
        self.embed = Embedding(config.vocab_size, config.dim, rng)
        self.input_dropout = Dropout(config.dropout_rate)
        self.layers = [
            DecoderLayer(
                config.dim, config.n_heads, config.ffn_dim, config.dropout_rate, rng
            )
            for _ in range(config.n_layers_d)
        ]
        self.final_norm = LayerNorm(config.dim)
        self._positions = sinusoidal_positions(config.max_len, config.dim)

    def forward(
        self, prefix_ids: np.ndarray, memory: Tensor, memory_mask: np.ndarray
    ) -> Tensor:
        """[B, U] 前缀 + [B, T, dim] 编码器状态 → [B, U, vocab] logits

        位置 u 的 logits 只依赖前缀的 0..u 位置。
        """
        length = prefix_ids.shape[1]
        if length > self.config.max_len:
            raise ShapeError(
                f"prefix length {length} exceeds decoder max_len {self.config.max_len}",
                primitive="decode",
                dims=[length, self.config.max_len],
            )
        x = (
            self.embed(prefix_ids) * math.sqrt(self.config.dim)
            + self._positions[:length]
        )
        x = self.input_dropout(x)
        self_bias = causal_bias(length)
        memory_bias = key_padding_bias(memory_mask)
        for layer in self.layers:
            x = layer(x, memory, self_bias, memory_bias)
        return self.final_norm(x) @ self.embed.weight.swap_last()
