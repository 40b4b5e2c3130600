"""教师文本编码器

token 嵌入 + 正弦位置编码 + 前置归一化 Transformer，另带一个掩码词预测头，
仅在教师预训练时使用。
"""

import math

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor
from ..exceptions import ShapeError
from ..types.configs import TextEncoderConfig
from .layers import (
    Dropout,
    Embedding,
    EncoderLayer,
    LayerNorm,
    Linear,
    Module,
    key_padding_bias,
    sinusoidal_positions,
)


class TextEncoder(Module):
    def __init__(self, config: TextEncoderConfig, rng: np.random.Generator):
        self.config = config
        self.embed = Embedding(config.vocab_size, config.dim_t, rng)
        self.input_dropout = Dropout(config.dropout_rate)
        self.layers = [
            EncoderLayer(
                config.dim_t, config.n_heads, config.ffn_dim, config.dropout_rate, rng
            )
            for _ in range(config.n_layers_t)
        ]
        self.final_norm = LayerNorm(config.dim_t)
        self.mlm_head = Linear(config.dim_t, config.vocab_size, rng)
        self._positions = sinusoidal_positions(config.max_len, config.dim_t)

    def check_lengths(self, lengths: np.ndarray) -> None:
        longest = int(np.max(lengths)) if len(lengths) else 0
        if longest > self.config.max_len:
            raise ShapeError(
                f"sequence length {longest} exceeds max_len {self.config.max_len}",
                primitive="encode_text",
                dims=[longest, self.config.max_len],
            )
        if len(lengths) and int(np.min(lengths)) < 1:
            raise ShapeError("empty token sequence", primitive="encode_text", dims=[0])

    def states(self, ids: np.ndarray, mask: np.ndarray) -> Tensor:
        """[B, T] ids → [B, T, dim_t] 上下文状态"""
        self.check_lengths(mask.sum(axis=1))
        length = ids.shape[1]
        x = self.embed(ids) * math.sqrt(self.config.dim_t) + self._positions[:length]
        x = self.input_dropout(x)
        bias = key_padding_bias(mask)
        for layer in self.layers:
            x = layer(x, bias)
        return self.final_norm(x)

    def forward(self, ids: np.ndarray, mask: np.ndarray) -> Tensor:
        """[B, T] ids → [B, dim_t] 单位化句向量"""
        return F.l2_normalize(F.mean_pool_masked(self.states(ids, mask), mask))

    def mlm_logits(self, ids: np.ndarray, mask: np.ndarray) -> Tensor:
        return self.mlm_head(self.states(ids, mask))
