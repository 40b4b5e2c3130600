"""配置模块

两层配置：
1. 运行时设置（环境变量，前缀 JOINT_EMBED_）：日志、运行目录、缓存目录、线程数；
2. 实验配置（TOML 文本，嵌套分节，拒绝未知键）：语料、模型结构、训练预算与评估参数。
"""

import hashlib
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Union

import toml
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError
from .types.configs import (
    AcousticConfig,
    AsrPretrainConfig,
    BundleConfig,
    CorpusConfig,
    DecoderConfig,
    JointConfig,
    ProbeClassifierConfig,
    ProbingSizes,
    ProjectionHeadConfig,
    SpeechEncoderConfig,
    StrictModel,
    TeacherPretrainConfig,
    TextEncoderConfig,
    ZeroShotConfig,
)


class RuntimeSettings(BaseSettings):
    """运行时设置"""

    model_config = SettingsConfigDict(
        env_prefix="JOINT_EMBED_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # 日志配置
    log_level: str = Field(default="INFO", description="日志级别")
    log_format: str = Field(
        default="%(levelprefix)s %(asctime)s | %(name)s | %(message)s",
        description="日志格式",
    )
    log_file: Optional[str] = Field(default=None, description="日志文件路径")

    # 目录配置
    runs_dir: str = Field(default="runs", description="训练运行目录根")
    cache_dir: str = Field(default=".embedding_cache", description="嵌入缓存目录")

    # 并发配置
    threads: int = Field(default=1, ge=1, description="评估时的嵌入线程数")


class DevelopmentSettings(RuntimeSettings):
    """开发环境配置"""
    log_level: str = "DEBUG"


class TestingSettings(RuntimeSettings):
    """测试环境配置"""
    log_level: str = "WARNING"
    runs_dir: str = "test_runs"
    cache_dir: str = "test_cache"


@lru_cache()
def get_settings() -> RuntimeSettings:
    """按 ENVIRONMENT 环境变量获取设置实例"""
    environment = os.getenv("ENVIRONMENT", "production").lower()
    if environment == "development":
        return DevelopmentSettings()
    if environment == "testing":
        return TestingSettings()
    return RuntimeSettings()


class ExperimentConfig(StrictModel):
    """实验配置：所有分节的汇总

    TOML 文件的每个表对应一个字段；缺省的分节取默认值。
    """

    seed: int = Field(default=0, ge=0, description="全局种子")
    corpus: CorpusConfig = CorpusConfig()
    acoustic: AcousticConfig = AcousticConfig()
    text: TextEncoderConfig = TextEncoderConfig()
    speech: SpeechEncoderConfig = SpeechEncoderConfig()
    projection: ProjectionHeadConfig = ProjectionHeadConfig()
    decoder: Optional[DecoderConfig] = DecoderConfig()
    teacher_pretrain: TeacherPretrainConfig = TeacherPretrainConfig()
    asr_pretrain: AsrPretrainConfig = AsrPretrainConfig()
    joint: JointConfig = JointConfig()
    probe: ProbeClassifierConfig = ProbeClassifierConfig()
    probing: ProbingSizes = ProbingSizes()
    zeroshot: ZeroShotConfig = ZeroShotConfig()

    @model_validator(mode="after")
    def _check_cross_sections(self) -> "ExperimentConfig":
        if self.corpus.vocab_size != self.text.vocab_size:
            raise ValueError("corpus.vocab_size must equal text.vocab_size")
        if self.acoustic.frame_dim != self.speech.frame_dim:
            raise ValueError("acoustic.frame_dim must equal speech.frame_dim")
        if self.corpus.max_len > self.text.max_len:
            raise ValueError("corpus.max_len exceeds text.max_len")
        # 结构兼容性由 BundleConfig 校验
        _ = self.bundle
        return self

    @property
    def bundle(self) -> BundleConfig:
        return BundleConfig(
            text=self.text,
            speech=self.speech,
            projection=self.projection,
            decoder=self.decoder,
        )


def _strip_none(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip_none(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_strip_none(v) for v in value]
    return value


def canonical_text(config: StrictModel) -> str:
    """配置的规范 TOML 文本（字段顺序固定，None 省略，无解码器写作 decoder = false）"""
    data = config.model_dump(mode="json")
    if "decoder" in data and data["decoder"] is None:
        data["decoder"] = False
    return toml.dumps(_strip_none(data))


def parse_bundle_config(text: str) -> BundleConfig:
    """解析检查点中保存的模型结构配置"""
    try:
        data = toml.loads(text)
        if data.get("decoder") is False:
            data["decoder"] = None
        return BundleConfig.model_validate(data)
    except (toml.TomlDecodeError, ValidationError) as exc:
        raise ConfigurationError(
            f"invalid model config block: {exc}", cause=exc
        ) from exc


def config_hash(config: StrictModel) -> str:
    """规范文本的 sha256"""
    return hashlib.sha256(canonical_text(config).encode("utf-8")).hexdigest()


def parse_config(text: str) -> ExperimentConfig:
    """解析 TOML 文本为实验配置

    Raises:
        ConfigurationError: 语法错误、未知键或取值非法
    """
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ConfigurationError(f"malformed config: {exc}", cause=exc) from exc
    return config_from_dict(data)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    # TOML 中省略 decoder 表表示使用默认解码器；显式关闭写 decoder = false
    if data.get("decoder") is False:
        data = {**data, "decoder": None}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(p) for p in first.get("loc", ()))
        raise ConfigurationError(
            f"invalid config at '{key}': {first.get('msg')}",
            config_key=key,
            config_value=first.get("input"),
            cause=exc,
        ) from exc


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """读取配置文件；未给路径时返回默认配置"""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(
            f"config file not found: {path}",
            config_key="config",
            config_value=str(path),
        )
    return parse_config(path.read_text(encoding="utf-8"))


def dump_config(config: StrictModel, path: Union[str, Path]) -> None:
    Path(path).write_text(canonical_text(config), encoding="utf-8")


def with_overrides(config: ExperimentConfig, **sections: Any) -> ExperimentConfig:
    """返回替换了若干字段后重新校验的配置"""
    data = config.model_dump()
    for key, value in sections.items():
        data[key] = value.model_dump() if isinstance(value, StrictModel) else value
    return config_from_dict(data)
