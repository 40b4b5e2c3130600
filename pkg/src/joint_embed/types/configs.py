"""配置模型定义

所有配置都是拒绝未知键的 pydantic 模型，可以无损地转成规范 TOML 文本。
默认值即桌面规模实验的标准设置。
"""

from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.optim import LrSchedule


class StrictModel(BaseModel):
    """拒绝未知键、不可变的配置基类"""
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------------------
# 模型结构
# ---------------------------------------------------------------------------

class TextEncoderConfig(StrictModel):
    """教师文本编码器"""
    vocab_size: int = Field(default=64, ge=8, description="词表大小")
    dim_t: int = Field(default=64, ge=2, description="教师宽度")
    n_layers_t: int = Field(default=4, ge=1, description="Transformer 层数")
    n_heads: int = Field(default=4, ge=1, description="注意力头数")
    ffn_dim: int = Field(default=128, ge=1, description="前馈层宽度")
    max_len: int = Field(default=32, ge=1, description="最大序列长度")
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0, description="dropout 比例")

    @model_validator(mode="after")
    def _check_heads(self) -> "TextEncoderConfig":
        if self.dim_t % self.n_heads:
            raise ValueError(
                f"dim_t {self.dim_t} not divisible by n_heads {self.n_heads}"
            )
        return self


class SpeechEncoderConfig(StrictModel):
    """学生语音编码器：卷积下采样 + Transformer"""
    frame_dim: int = Field(default=16, ge=1, description="输入帧维度")
    conv_layers: List[Tuple[int, int]] = Field(
        default=[(3, 2), (3, 2)], description="(kernel, stride) 列表"
    )
    dim_s: int = Field(default=32, ge=2, description="学生宽度")
    n_layers_s: int = Field(default=3, ge=1, description="Transformer 层数")
    n_heads: int = Field(default=4, ge=1, description="注意力头数")
    ffn_dim: int = Field(default=64, ge=1, description="前馈层宽度")
    max_frames: int = Field(default=256, ge=1, description="下采样后位置编码的最大长度")
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0, description="dropout 比例")

    @model_validator(mode="after")
    def _check_layout(self) -> "SpeechEncoderConfig":
        if self.dim_s % self.n_heads:
            raise ValueError(
                f"dim_s {self.dim_s} not divisible by n_heads {self.n_heads}"
            )
        if not self.conv_layers:
            raise ValueError("at least one convolution layer is required")
        for kernel, stride in self.conv_layers:
            if kernel < 1 or stride < 1:
                raise ValueError(f"invalid convolution ({kernel}, {stride})")
        if self.downsampling_factor < 2:
            raise ValueError("total temporal downsampling factor must be >= 2")
        return self

    @property
    def downsampling_factor(self) -> int:
        factor = 1
        for _, stride in self.conv_layers:
            factor *= stride
        return factor


class ProjectionHeadConfig(StrictModel):
    """投影头：Linear → GELU → Linear → Dropout → LayerNorm"""
    in_dim: int = Field(default=32, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    out_dim: int = Field(default=64, ge=1)
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0)


class DecoderConfig(StrictModel):
    """ASR 目标使用的 Transformer 解码器"""
    n_layers_d: int = Field(default=2, ge=1)
    dim: int = Field(default=32, ge=2)
    n_heads: int = Field(default=4, ge=1)
    ffn_dim: int = Field(default=64, ge=1)
    vocab_size: int = Field(default=64, ge=8)
    max_len: int = Field(default=64, ge=2)
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_heads(self) -> "DecoderConfig":
        if self.dim % self.n_heads:
            raise ValueError(f"dim {self.dim} not divisible by n_heads {self.n_heads}")
        return self


class BundleConfig(StrictModel):
    """完整模型组的结构配置"""
    text: TextEncoderConfig = TextEncoderConfig()
    speech: SpeechEncoderConfig = SpeechEncoderConfig()
    projection: ProjectionHeadConfig = ProjectionHeadConfig()
    decoder: Optional[DecoderConfig] = DecoderConfig()

    @model_validator(mode="after")
    def _check_compatible(self) -> "BundleConfig":
        if self.projection.in_dim != self.speech.dim_s:
            raise ValueError("projection.in_dim must equal speech.dim_s")
        if self.projection.out_dim != self.text.dim_t:
            raise ValueError(
                "projection.out_dim must equal text.dim_t "
                "(embedding spaces must be comparable)"
            )
        if self.decoder is not None:
            if self.decoder.dim != self.speech.dim_s:
                raise ValueError("decoder.dim must equal speech.dim_s")
            if self.decoder.vocab_size != self.text.vocab_size:
                raise ValueError("decoder.vocab_size must equal text.vocab_size")
        return self


# ---------------------------------------------------------------------------
# 数据生成
# ---------------------------------------------------------------------------

class CorpusConfig(StrictModel):
    """合成配对语料"""
    n_train: int = Field(default=2000, ge=1)
    n_valid: int = Field(default=200, ge=1)
    n_test: int = Field(default=200, ge=1)
    min_len: int = Field(default=4, ge=1, description="句长下限")
    max_len: int = Field(default=12, ge=1, description="句长上限")
    vocab_size: int = Field(default=64, ge=8)
    digit_class_size: int = Field(default=10, ge=2, description="可互换词类的大小")
    class_size: int = Field(default=5, ge=2, description="其余上下文词类的大小")
    transition_concentration: float = Field(
        default=0.3, gt=0.0, description="类别转移 Dirichlet 浓度"
    )
    n_speakers: int = Field(default=20, ge=1, description="训练说话人数")

    @model_validator(mode="after")
    def _check_range(self) -> "CorpusConfig":
        if self.min_len > self.max_len:
            raise ValueError(
                f"empty sentence length range [{self.min_len}, {self.max_len}]"
            )
        return self


class AcousticConfig(StrictModel):
    """合成声学渲染器"""
    frame_dim: int = Field(default=16, ge=1)
    d_min: int = Field(default=2, ge=1, description="每个词的最少帧数")
    d_max: int = Field(default=4, ge=1, description="每个词的最多帧数")
    noise_sigma: float = Field(default=0.1, ge=0.0, description="训练渲染噪声")
    probe_noise_sigma: float = Field(
        default=0.3, ge=0.0, description="探针渲染噪声（模拟 TTS 误差）"
    )
    channel_scale: float = Field(default=0.1, ge=0.0, description="说话人仿射信道扰动幅度")

    @model_validator(mode="after")
    def _check_durations(self) -> "AcousticConfig":
        if self.d_min > self.d_max:
            raise ValueError("d_min must not exceed d_max")
        return self


class ZeroShotConfig(StrictModel):
    n_classes: int = Field(default=10, ge=2)
    n_per_class: int = Field(default=7, ge=1)
    silence_frames: int = Field(default=2, ge=0, description="单词语音两端的静音帧")


class ProbingSizes(StrictModel):
    n_train: int = Field(default=2000, ge=1)
    n_valid: int = Field(default=500, ge=1)
    n_test: int = Field(default=500, ge=1)


# ---------------------------------------------------------------------------
# 训练与评估
# ---------------------------------------------------------------------------

class AugmentConfig(StrictModel):
    spec_augment: bool = Field(default=True, description="训练时启用时间/通道掩码")
    time_mask_max: int = Field(default=4, ge=0)
    channel_mask_max: int = Field(default=3, ge=0)


class TeacherPretrainConfig(StrictModel):
    """教师掩码词预测预训练"""
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    mask_rate: float = Field(default=0.15, gt=0.0, lt=1.0)
    schedule: LrSchedule = LrSchedule(peak_lr=1e-3, warmup_steps=200)


class AsrPretrainConfig(StrictModel):
    """学生 ASR 预训练"""
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    schedule: LrSchedule = LrSchedule(peak_lr=1e-3, warmup_steps=300)
    augment: AugmentConfig = AugmentConfig()
    snapshot_steps: List[int] = Field(
        default_factory=list, description="额外保存的中间步数（WER 趋势用）"
    )


class JointConfig(StrictModel):
    """联合嵌入训练的默认预算"""
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=32, ge=1)
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    schedule: LrSchedule = LrSchedule(peak_lr=1e-3, warmup_steps=300)
    augment: AugmentConfig = AugmentConfig()


class ProbeClassifierConfig(StrictModel):
    """探针分类器：两层线性 + tanh + dropout"""
    hidden_dim: int = Field(default=64, ge=1)
    dropout_rate: float = Field(default=0.1, ge=0.0, lt=1.0)
    epochs: int = Field(default=10, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    batch_size: int = Field(default=64, ge=1)
    seed: int = Field(default=0, ge=0)
