"""枚举类型定义"""

from enum import Enum


class InitMode(str, Enum):
    """模型初始化方式"""
    RANDOM = "random"
    FROM_CHECKPOINT = "from_checkpoint"
    TEACHER_PRETRAINED = "teacher_pretrained"


class StudentInit(str, Enum):
    """学生语音编码器初始化"""
    RANDOM = "random"
    PRETRAINED = "pretrained"


class Trainable(str, Enum):
    """联合训练中允许更新的参数组"""
    ALL_STUDENT = "all-student"
    PROJECTION_ONLY = "projection-only"


class Direction(str, Enum):
    """检索方向（查询→目标）"""
    T2S = "T->S"
    S2T = "S->T"


class ZeroShotKind(str, Enum):
    """零样本数据集类型"""
    DIGIT_LIKE = "digit-like"    # 上下文可互换的单词标签
    WORD_LIKE = "word-like"      # 来自不同上下文类别的单词标签
    SENTENCE_LIKE = "sentence-like"  # 完整句子标签


class ProbingTask(str, Enum):
    """探针任务"""
    LEN = "LEN"          # 句长分桶
    CONTENT = "CONTENT"  # 出现了哪个指定词
    SHIFT = "SHIFT"      # 是否交换过一对相邻词
    MARKER = "MARKER"    # 出现了哪个标记词
    PARITY = "PARITY"    # 指定类别词计数的奇偶


class Split(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class Modality(str, Enum):
    TEXT = "text"
    SPEECH = "speech"


class CellStatus(str, Enum):
    """实验矩阵单元状态"""
    OK = "ok"
    FAILED = "failed"
    REFERENCE = "reference"  # 未训练的参照模型
