"""Pytest配置文件

定义测试夹具和配置。所有训练类测试都使用极小的模型与语料。
"""

import os

import numpy as np
import pytest

os.environ.setdefault("ENVIRONMENT", "testing")

from joint_embed.config import ExperimentConfig, config_from_dict
from joint_embed.core.tensor import current_tape, set_dropout_stream, set_eval_mode
from joint_embed.datagen import gen_corpus
from joint_embed.models import init_bundle
from joint_embed.types.configs import BundleConfig


TINY_CONFIG = {
    "seed": 3,
    "corpus": {
        "n_train": 12,
        "n_valid": 4,
        "n_test": 6,
        "min_len": 3,
        "max_len": 8,
        "vocab_size": 24,
        "digit_class_size": 6,
        "class_size": 4,
        "n_speakers": 3,
    },
    "acoustic": {"frame_dim": 8, "d_min": 2, "d_max": 3},
    "text": {"vocab_size": 24, "dim_t": 8, "n_layers_t": 1, "n_heads": 2, "ffn_dim": 16, "max_len": 16},
    "speech": {
        "frame_dim": 8,
        "conv_layers": [[3, 2]],
        "dim_s": 8,
        "n_layers_s": 1,
        "n_heads": 2,
        "ffn_dim": 16,
        "max_frames": 64,
    },
    "projection": {"in_dim": 8, "hidden_dim": 16, "out_dim": 8},
    "decoder": {"n_layers_d": 1, "dim": 8, "n_heads": 2, "ffn_dim": 16, "vocab_size": 24, "max_len": 24},
    "teacher_pretrain": {"epochs": 2, "batch_size": 4, "schedule": {"peak_lr": 1e-3, "warmup_steps": 4}},
    "asr_pretrain": {"epochs": 2, "batch_size": 4, "schedule": {"peak_lr": 1e-3, "warmup_steps": 4}},
    "joint": {"epochs": 2, "batch_size": 4, "schedule": {"peak_lr": 1e-3, "warmup_steps": 4}},
    "probe": {"hidden_dim": 8, "epochs": 3, "batch_size": 4},
    "probing": {"n_train": 12, "n_valid": 6, "n_test": 6},
    "zeroshot": {"n_classes": 3, "n_per_class": 2},
}


@pytest.fixture(autouse=True)
def reset_runtime_state():
    """每个测试前后清空计算带并恢复训练模式"""
    current_tape().clear()
    set_eval_mode(False)
    set_dropout_stream(0, 0)
    yield
    current_tape().clear()
    set_eval_mode(False)


@pytest.fixture(scope="session")
def tiny_config() -> ExperimentConfig:
    """极小实验配置夹具"""
    return config_from_dict(TINY_CONFIG)


@pytest.fixture(scope="session")
def tiny_bundle_config(tiny_config) -> BundleConfig:
    return tiny_config.bundle


@pytest.fixture(scope="session")
def tiny_corpus(tiny_config):
    """极小配对语料夹具"""
    return gen_corpus(tiny_config.seed, tiny_config.corpus, tiny_config.acoustic)


@pytest.fixture
def tiny_bundle(tiny_bundle_config):
    """随机初始化的极小模型组"""
    return init_bundle(tiny_bundle_config, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# pytest标记
def pytest_configure(config):
    """配置pytest标记"""
    config.addinivalue_line("markers", "unit: 单元测试")
    config.addinivalue_line("markers", "integration: 集成测试")
    config.addinivalue_line("markers", "slow: 慢速测试")
