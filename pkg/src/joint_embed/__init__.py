"""JointEmbed: 语音-文本联合嵌入空间的桌面规模实验

冻结的文本教师编码器定义目标嵌入空间，语音学生编码器被训练去逼近它；
附带从零实现的自动微分引擎、合成配对数据生成器以及检索、零样本与探针评估。
"""

from .config import ExperimentConfig, get_settings, load_config
from .core import Tensor, backward
from .exceptions import ErrorHandler, JointEmbedError
from .models import ModelBundle, encode_speech, encode_text, init_bundle

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "get_settings",
    "load_config",
    "Tensor",
    "backward",
    "ErrorHandler",
    "JointEmbedError",
    "ModelBundle",
    "encode_speech",
    "encode_text",
    "init_bundle",
]
