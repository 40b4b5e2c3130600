"""学生语音编码器与投影头

卷积下采样（每层后 GELU，并把超出有效长度的位置清零），随后是 Transformer 编码。
投影头把学生宽度映射到教师宽度，使两种模态的句向量可以直接比较。
"""

from typing import List, Tuple

import numpy as np

from ..core import functional as F
from ..core.tensor import Tensor
from ..exceptions import ShapeError
from ..types.configs import ProjectionHeadConfig, SpeechEncoderConfig
from .layers import (
    Conv1d,
    Dropout,
    EncoderLayer,
    LayerNorm,
    Linear,
    Module,
    key_padding_bias,
    sinusoidal_positions,
)


class SpeechEncoder(Module):
    def __init__(self, config: SpeechEncoderConfig, rng: np.random.Generator):
        self.config = config
        convs: List[Conv1d] = []
        in_channels = config.frame_dim
        for kernel, stride in config.conv_layers:
            convs.append(Conv1d(in_channels, config.dim_s, kernel, stride, rng))
            in_channels = config.dim_s
        self.convs = convs
        self.input_dropout = Dropout(config.dropout_rate)
        self.layers = [
            EncoderLayer(
                config.dim_s, config.n_heads, config.ffn_dim, config.dropout_rate, rng
            )
            for _ in range(config.n_layers_s)
        ]
        self.final_norm = LayerNorm(config.dim_s)
        self._positions = sinusoidal_positions(config.max_frames, config.dim_s)

    def output_lengths(self, lengths: np.ndarray) -> np.ndarray:
        """卷积栈之后的有效长度（精确步长算术）"""
        lengths = np.asarray(lengths, dtype=np.int64)
        for conv in self.convs:
            lengths = conv.output_length(lengths)
        return lengths

    def check_lengths(self, lengths: np.ndarray) -> None:
        shortest = int(np.min(lengths))
        factor = self.config.downsampling_factor
        if shortest < factor:
            raise ShapeError(
                f"input shorter than receptive field ({shortest} frames < {factor})",
                primitive="encode_speech",
                dims=[shortest, factor],
            )

    def forward(self, frames: Tensor, lengths: np.ndarray) -> Tuple[Tensor, np.ndarray]:
        """[B, T, frame_dim] → ([B, T', dim_s] 状态, [B, T'] 有效掩码)"""
        lengths = np.asarray(lengths, dtype=np.int64)
        self.check_lengths(lengths)
        x = frames
        for conv in self.convs:
            x = F.gelu(conv(x))
            lengths = conv.output_length(lengths)
            mask = np.arange(x.shape[1])[None, :] < lengths[:, None]
            x = x * mask[..., None].astype(np.float64)

        out_len = x.shape[1]
        if out_len > self.config.max_frames:
            raise ShapeError(
                f"{out_len} downsampled positions exceed max_frames {self.config.max_frames}",
                primitive="encode_speech",
                dims=[out_len, self.config.max_frames],
            )
        x = self.input_dropout(x + self._positions[:out_len])
        bias = key_padding_bias(mask)
        for layer in self.layers:
            x = layer(x, bias)
        return self.final_norm(x), mask


class ProjectionHead(Module):
    """Linear → GELU → Linear → Dropout → LayerNorm"""

    def __init__(self, config: ProjectionHeadConfig, rng: np.random.Generator):
        self.config = config
        self.fc1 = Linear(config.in_dim, config.hidden_dim, rng)
        self.fc2 = Linear(config.hidden_dim, config.out_dim, rng)
        self.dropout = Dropout(config.dropout_rate)
        self.norm = LayerNorm(config.out_dim)

    def forward(self, x: Tensor) -> Tensor:
        return self.norm(self.dropout(self.fc2(F.gelu(self.fc1(x)))))
