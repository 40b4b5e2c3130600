"""模型组

ModelBundle 把教师、学生、投影头和可选解码器组织成带名称前缀的参数组，
并提供两条编码管线、解码接口以及初始化入口。
"""

import copy
import hashlib
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core import functional as F
from ..core.tensor import Parameter, Tensor, inference_mode
from ..datagen.vocabulary import BOS_ID, EOS_ID, PAD_ID
from ..exceptions import CheckpointError, ConfigurationError, MissingDecoderError
from ..logger import get_logger
from ..types.configs import BundleConfig
from ..types.enums import InitMode
from .checkpoint import load_checkpoint
from .decoder import Decoder
from .layers import Module
from .speech_encoder import ProjectionHead, SpeechEncoder
from .text_encoder import TextEncoder

logger = get_logger(__name__)

GROUPS = ("teacher", "student", "projection", "decoder")

TokenSeq = Sequence[int]


def pad_tokens(
    seqs: Sequence[TokenSeq], pad_id: int = PAD_ID
) -> Tuple[np.ndarray, np.ndarray]:
    """右填充 token 序列 → (ids[B, T], mask[B, T])"""
    if not seqs:
        raise ConfigurationError("empty batch", config_key="batch")
    longest = max(len(s) for s in seqs)
    ids = np.full((len(seqs), max(longest, 1)), pad_id, dtype=np.int64)
    mask = np.zeros(ids.shape, dtype=bool)
    for row, seq in enumerate(seqs):
        ids[row, : len(seq)] = seq
        mask[row, : len(seq)] = True
    return ids, mask


def pad_frames(frames: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """零填充帧序列 → (frames[B, T, F], lengths[B])"""
    if not frames:
        raise ConfigurationError("empty batch", config_key="batch")
    lengths = np.array([f.shape[0] for f in frames], dtype=np.int64)
    dim = frames[0].shape[1]
    out = np.zeros((len(frames), int(lengths.max()), dim), dtype=np.float64)
    for row, f in enumerate(frames):
        out[row, : f.shape[0]] = f
    return out, lengths


class ModelBundle:
    """四个参数组的容器

    参数名都以组名为前缀（teacher./student./projection./decoder.），
    因此跨组唯一。冻结标志按组维护。
    """

    def __init__(
        self,
        config: BundleConfig,
        teacher: TextEncoder,
        student: SpeechEncoder,
        projection: ProjectionHead,
        decoder: Optional[Decoder] = None,
    ):
        self.config = config
        self.teacher = teacher
        self.student = student
        self.projection = projection
        self.decoder = decoder
        self.frozen: Dict[str, bool] = {group: False for group in GROUPS}
        for group, module in self.modules().items():
            module.assign_names(group + ".")
        names = [name for name, _ in self.named_parameters()]
        if len(names) != len(set(names)):
            raise ConfigurationError("parameter names are not unique across groups")

    def modules(self) -> Dict[str, Module]:
        groups: Dict[str, Module] = {
            "teacher": self.teacher,
            "student": self.student,
            "projection": self.projection,
        }
        if self.decoder is not None:
            groups["decoder"] = self.decoder
        return groups

    def named_parameters(
        self, group: Optional[str] = None
    ) -> Iterator[Tuple[str, Parameter]]:
        for name, module in self.modules().items():
            if group is not None and name != group:
                continue
            for _, param in module.named_parameters():
                yield param.name, param

    def parameters(self, groups: Optional[Sequence[str]] = None) -> List[Parameter]:
        selected = groups if groups is not None else list(self.modules())
        return [p for g in selected for _, p in self.named_parameters(g)]

    def freeze(self, group: str) -> None:
        for _, param in self.named_parameters(group):
            param.freeze()
        self.frozen[group] = True

    def unfreeze(self, group: str) -> None:
        for _, param in self.named_parameters(group):
            param.unfreeze()
        self.frozen[group] = False

    def state_dict(
        self, groups: Optional[Sequence[str]] = None
    ) -> Dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters(groups)}

    def load_state_dict(
        self, state: Dict[str, np.ndarray], groups: Optional[Sequence[str]] = None
    ) -> List[str]:
        """载入 state 中出现的参数组；组内参数必须齐全且形状一致

        Returns:
            List[str]: 实际载入的组
        """
        loaded = []
        for group in groups if groups is not None else list(self.modules()):
            params = list(self.named_parameters(group))
            present = [name for name, _ in params if name in state]
            if not present:
                continue
            for name, param in params:
                if name not in state:
                    raise CheckpointError(
                        f"missing parameter '{name}'", parameter=name
                    )
                value = np.asarray(state[name], dtype=np.float64)
                if value.shape != param.data.shape:
                    raise CheckpointError(
                        f"shape mismatch for '{name}': "
                        f"checkpoint {value.shape} vs model {param.data.shape}",
                        parameter=name,
                    )
                param.data = value.copy()
            loaded.append(group)
        known = {name for name, _ in self.named_parameters()}
        unexpected = sorted(
            name
            for name in state
            if name.split(".", 1)[0] in loaded and name not in known
        )
        if unexpected:
            raise CheckpointError(
                f"unexpected parameter '{unexpected[0]}'", parameter=unexpected[0]
            )
        return loaded

    def digest(self, group: str) -> str:
        """参数组的内容摘要（名称 + 字节），用于冻结漂移检测"""
        h = hashlib.sha256()
        for name, param in self.named_parameters(group):
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(param.data).tobytes())
        return h.hexdigest()

    def clone(self) -> "ModelBundle":
        return copy.deepcopy(self)

    def require_decoder(self) -> Decoder:
        if self.decoder is None:
            raise MissingDecoderError()
        return self.decoder


def _group_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def init_bundle(
    config: BundleConfig,
    seed: int,
    init_mode: InitMode = InitMode.RANDOM,
    checkpoint_path: Optional[Union[str, Path]] = None,
    teacher_path: Optional[Union[str, Path]] = None,
) -> ModelBundle:
    """构建模型组

    每个参数组使用独立的随机流（由 seed 和组序号决定），因此同一 seed 得到逐位一致的模型，
    且某一组从检查点载入不会影响其余组的随机初始化。投影头在所有模式下都随机初始化，
    除非检查点本身包含投影头参数。

    Args:
        config: 模型结构配置
        seed: 初始化种子
        init_mode: random / from_checkpoint / teacher_pretrained
        checkpoint_path: from_checkpoint 模式下的检查点
        teacher_path: 预训练教师检查点（teacher_pretrained 模式必需，其余模式可选）

    Returns:
        ModelBundle: 模型组
    """
    init_mode = InitMode(init_mode)
    decoder = None
    if config.decoder is not None:
        decoder = Decoder(config.decoder, _group_rng(seed, 3))
    bundle = ModelBundle(
        config=config,
        teacher=TextEncoder(config.text, _group_rng(seed, 0)),
        student=SpeechEncoder(config.speech, _group_rng(seed, 1)),
        projection=ProjectionHead(config.projection, _group_rng(seed, 2)),
        decoder=decoder,
    )

    if init_mode == InitMode.FROM_CHECKPOINT:
        if checkpoint_path is None:
            raise ConfigurationError(
                "from_checkpoint requires a checkpoint path",
                config_key="checkpoint_path",
            )
        loaded = bundle.load_state_dict(load_checkpoint(checkpoint_path).state)
        logger.info(f"loaded groups {loaded} from {checkpoint_path}")
    elif init_mode == InitMode.TEACHER_PRETRAINED and teacher_path is None:
        raise ConfigurationError(
            "teacher_pretrained requires a teacher checkpoint",
            config_key="teacher_path",
        )

    if teacher_path is not None:
        teacher_state = load_checkpoint(teacher_path).state
        loaded = bundle.load_state_dict(teacher_state, groups=["teacher"])
        if "teacher" not in loaded:
            raise CheckpointError(
                f"no teacher parameters in {teacher_path}", path=str(teacher_path)
            )
    return bundle


# ---------------------------------------------------------------------------
# 编码管线
# ---------------------------------------------------------------------------

def encode_text_batch(bundle: ModelBundle, seqs: Sequence[TokenSeq]) -> Tensor:
    """文本管线：[B] token 序列 → [B, dim_t] 单位向量（遵循当前 eval/grad 状态）"""
    ids, mask = pad_tokens(seqs)
    return bundle.teacher(ids, mask)


def speech_states(
    bundle: ModelBundle, frames: Sequence[np.ndarray]
) -> Tuple[Tensor, np.ndarray]:
    """学生编码器状态 [B, T', dim_s] 与有效掩码"""
    padded, lengths = pad_frames(frames)
    return bundle.student(Tensor(padded), lengths)


def embed_speech_states(
    bundle: ModelBundle, states: Tensor, mask: np.ndarray
) -> Tensor:
    """投影头 → 有效位置均值池化 → 单位化"""
    return F.l2_normalize(F.mean_pool_masked(bundle.projection(states), mask))


def encode_speech_batch(bundle: ModelBundle, frames: Sequence[np.ndarray]) -> Tensor:
    """语音管线：[B] 帧序列 → [B, dim_t] 单位向量"""
    states, mask = speech_states(bundle, frames)
    return embed_speech_states(bundle, states, mask)


def encode_text(tokens: TokenSeq, bundle: ModelBundle) -> np.ndarray:
    """单句文本嵌入（推理模式）"""
    with inference_mode():
        return encode_text_batch(bundle, [tokens]).data[0].copy()


def encode_speech(frames: np.ndarray, bundle: ModelBundle) -> np.ndarray:
    """单条语音嵌入（推理模式）"""
    with inference_mode():
        return encode_speech_batch(bundle, [frames]).data[0].copy()


# ---------------------------------------------------------------------------
# 解码
# ---------------------------------------------------------------------------

def decoder_inputs(
    seqs: Sequence[TokenSeq],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """教师强制输入：[bos]+tokens 作为前缀，tokens+[eos] 作为目标"""
    prefixes = [[BOS_ID, *seq] for seq in seqs]
    targets = [[*seq, EOS_ID] for seq in seqs]
    prefix_ids, mask = pad_tokens(prefixes)
    target_ids, _ = pad_tokens(targets)
    return prefix_ids, target_ids, mask


def decoder_logits(
    bundle: ModelBundle,
    states: Tensor,
    memory_mask: np.ndarray,
    prefix_ids: np.ndarray,
) -> Tensor:
    return bundle.require_decoder()(prefix_ids, states, memory_mask)


def decode_asr_step(
    encoder_states: Union[Tensor, np.ndarray],
    prefix: TokenSeq,
    bundle: ModelBundle,
    memory_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """给定编码器状态与前缀（以 bos 开头），返回下一个 token 的 logits [vocab]"""
    decoder = bundle.require_decoder()
    states = encoder_states
    if not isinstance(states, Tensor):
        states = Tensor(states)
    if states.ndim == 2:
        states = states.reshape(1, *states.shape)
    if memory_mask is None:
        memory_mask = np.ones(states.shape[:2], dtype=bool)
    prefix = list(prefix) if len(prefix) else [BOS_ID]
    with inference_mode():
        prefix_ids = np.array([prefix], dtype=np.int64)
        mask = np.asarray(memory_mask, dtype=bool).reshape(1, -1)
        logits = decoder(prefix_ids, states, mask)
    return logits.data[0, -1].copy()


def greedy_decode_batch(
    bundle: ModelBundle,
    frames: Sequence[np.ndarray],
    max_steps: Optional[Sequence[int]] = None,
) -> List[Tuple[Tuple[int, ...], bool]]:
    """批量贪心解码

    每条输入最多解码 2 × 帧数 步（并受解码器 max_len 限制）；
    未在限制内产生 eos 的结果标记为未终止。

    Returns:
        List[Tuple[tokens, terminated]]
    """
    decoder = bundle.require_decoder()
    limits = [2 * f.shape[0] for f in frames] if max_steps is None else list(max_steps)
    limits = [min(limit, decoder.config.max_len - 1) for limit in limits]
    with inference_mode():
        states, mask = speech_states(bundle, frames)
        batch = len(frames)
        prefixes = np.full((batch, 1), BOS_ID, dtype=np.int64)
        outputs: List[List[int]] = [[] for _ in range(batch)]
        done = [False] * batch
        terminated = [False] * batch
        for step in range(max(limits) if limits else 0):
            logits = decoder(prefixes, states, mask).data[:, -1]
            next_ids = np.argmax(logits, axis=-1)
            for row in range(batch):
                if done[row]:
                    continue
                if step >= limits[row]:
                    done[row] = True
                    continue
                token = int(next_ids[row])
                if token == EOS_ID:
                    done[row] = terminated[row] = True
                else:
                    outputs[row].append(token)
            if all(done):
                break
            prefixes = np.concatenate([prefixes, next_ids[:, None]], axis=1)
    return [(tuple(out), flag) for out, flag in zip(outputs, terminated)]


def greedy_decode(
    bundle: ModelBundle, frames: np.ndarray, max_steps: Optional[int] = None
) -> Tuple[Tuple[int, ...], bool]:
    steps = None if max_steps is None else [max_steps]
    return greedy_decode_batch(bundle, [frames], steps)[0]
