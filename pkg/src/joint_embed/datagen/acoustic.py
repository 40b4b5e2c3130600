"""合成声学模型

每个 token 有一个单位方差的原型帧；渲染时按随机时长重复原型、叠加高斯噪声，
再经过说话人相关的仿射信道。帧以 fp32 精度量化，保证落盘往返逐位一致。
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..core.tensor import is_eval_mode
from ..exceptions import DataGenerationError
from ..types.configs import AcousticConfig


def quantize(frames: np.ndarray) -> np.ndarray:
    return np.asarray(frames, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True)
class AcousticModel:
    prototypes: np.ndarray  # [V, frame_dim]
    d_min: int
    d_max: int
    noise_sigma: float
    channel_scale: float
    seed: int

    def __post_init__(self):
        if self.d_min < 1 or self.d_min > self.d_max:
            raise DataGenerationError(
                f"invalid duration law [{self.d_min}, {self.d_max}]",
                generator="acoustic",
            )
        if self.noise_sigma < 0:
            raise DataGenerationError("noise_sigma must be >= 0", generator="acoustic")

    @classmethod
    def from_seed(
        cls, vocab_size: int, config: AcousticConfig, seed: int
    ) -> "AcousticModel":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 303]))
        prototypes = quantize(rng.standard_normal((vocab_size, config.frame_dim)))
        return cls(
            prototypes=prototypes,
            d_min=config.d_min,
            d_max=config.d_max,
            noise_sigma=config.noise_sigma,
            channel_scale=config.channel_scale,
            seed=seed,
        )

    @property
    def frame_dim(self) -> int:
        return int(self.prototypes.shape[1])

    def with_noise(self, sigma: float) -> "AcousticModel":
        return replace(self, noise_sigma=sigma)

    def with_durations(self, d_min: int, d_max: int) -> "AcousticModel":
        return replace(self, d_min=d_min, d_max=d_max)

    def channel(self, speaker: int) -> Tuple[np.ndarray, np.ndarray]:
        """说话人信道 (A, b)：frame ↦ A·frame + b；scale=0 时为恒等"""
        dim = self.frame_dim
        if self.channel_scale == 0.0:
            return np.eye(dim), np.zeros(dim)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 404, speaker]))
        matrix = np.eye(dim) + self.channel_scale * rng.standard_normal((dim, dim))
        offset = self.channel_scale * rng.standard_normal(dim)
        return matrix, offset


def render_frames(
    tokens: Sequence[int],
    speaker: int,
    am: AcousticModel,
    render_seed: int = 0,
    silence: int = 0,
    durations: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """渲染 token 序列为帧序列 [time, frame_dim]

    Args:
        tokens: token id 序列（非空）
        speaker: 说话人编号
        am: 声学模型
        render_seed: 渲染随机流坐标
        silence: 首尾各加的静音帧数（静音帧原型为零向量，同样经过噪声与信道）
        durations: 固定每个 token 的帧数，默认按时长分布采样

    Returns:
        np.ndarray: fp32 量化后的帧
    """
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise DataGenerationError(
            "cannot render an empty token sequence", generator="render_frames"
        )
    if max(tokens) >= am.prototypes.shape[0] or min(tokens) < 0:
        raise DataGenerationError(
            f"token outside acoustic vocabulary of {am.prototypes.shape[0]}",
            generator="render_frames",
        )

    rng = np.random.default_rng(np.random.SeedSequence([am.seed, speaker, render_seed]))
    if durations is None:
        durations = rng.integers(am.d_min, am.d_max + 1, size=len(tokens))
    elif len(durations) != len(tokens):
        raise DataGenerationError(
            "durations must match tokens", generator="render_frames"
        )

    clean = np.repeat(
        am.prototypes[tokens], np.asarray(durations, dtype=np.int64), axis=0
    )
    if silence:
        pad = np.zeros((silence, am.frame_dim))
        clean = np.concatenate([pad, clean, pad], axis=0)
    noisy = clean + am.noise_sigma * rng.standard_normal(clean.shape)
    matrix, offset = am.channel(speaker)
    return quantize(noisy @ matrix.T + offset)


def spec_augment_like(
    frames: np.ndarray,
    time_mask_max: int,
    channel_mask_max: int,
    seed: Union[int, Sequence[int]],
) -> np.ndarray:
    """把一个随机时间带和一个随机通道带清零；eval 模式下恒等

    时间带宽度 ~ U{0..time_mask_max}，通道带宽度 ~ U{0..channel_mask_max}，起点均匀。
    """
    time, channels = frames.shape
    if time_mask_max > time or channel_mask_max > channels:
        raise DataGenerationError(
            f"mask maxima ({time_mask_max}, {channel_mask_max}) exceed extents ({time}, {channels})",
            generator="spec_augment_like",
        )
    out = frames.copy()
    if is_eval_mode() or (time_mask_max == 0 and channel_mask_max == 0):
        return out
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    width = int(rng.integers(0, time_mask_max + 1))
    start = int(rng.integers(0, time - width + 1))
    out[start:start + width, :] = 0.0
    width = int(rng.integers(0, channel_mask_max + 1))
    start = int(rng.integers(0, channels - width + 1))
    out[:, start:start + width] = 0.0
    return out
