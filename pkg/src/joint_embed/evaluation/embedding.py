"""批量嵌入与磁盘缓存

嵌入计算按块切分，可交给线程池并行；每个线程在自己的推理模式下运行
（运行时状态是线程局部的），因此不会记录计算图，也没有 dropout。
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from ..core.tensor import Tensor, inference_mode
from ..exceptions import EvaluationError
from ..logger import get_logger
from ..models.bundle import ModelBundle, encode_speech_batch, encode_text_batch
from ..types.enums import Modality

logger = get_logger(__name__)

T = TypeVar("T")


def _embed_chunks(
    fn: Callable[[List[T]], Tensor], items: Sequence[T], batch_size: int, threads: int
) -> np.ndarray:
    if not items:
        raise EvaluationError("nothing to embed", instrument="embedding")
    chunks = [
        list(items[start:start + batch_size])
        for start in range(0, len(items), batch_size)
    ]

    def run(chunk: List[T]) -> np.ndarray:
        with inference_mode():
            return fn(chunk).data.copy()

    if threads <= 1:
        outputs = [run(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(run, chunks))
    return np.concatenate(outputs, axis=0)


def embed_texts(
    bundle: ModelBundle,
    seqs: Sequence[Sequence[int]],
    batch_size: int = 64,
    threads: int = 1,
) -> np.ndarray:
    """教师嵌入 [n, dim_t]"""
    return _embed_chunks(
        lambda chunk: encode_text_batch(bundle, chunk), seqs, batch_size, threads
    )


def embed_utterances(
    bundle: ModelBundle,
    frames: Sequence[np.ndarray],
    batch_size: int = 32,
    threads: int = 1,
) -> np.ndarray:
    """学生嵌入 [n, dim_t]"""
    return _embed_chunks(
        lambda chunk: encode_speech_batch(bundle, chunk), frames, batch_size, threads
    )


def encoder_hash(bundle: ModelBundle, modality: Union[Modality, str]) -> str:
    """某一模态编码管线的参数内容哈希"""
    modality = Modality(modality)
    groups = ["teacher"] if modality == Modality.TEXT else ["student", "projection"]
    h = hashlib.sha256()
    for group in groups:
        h.update(bundle.digest(group).encode("ascii"))
    return h.hexdigest()


class EmbeddingCache:
    """按 (编码器哈希, 数据集, 划分, 模态) 缓存嵌入矩阵的 .npz 目录"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path_for(
        self, encoder: str, dataset_id: str, split: str, modality: Union[Modality, str]
    ) -> Path:
        name = f"{dataset_id}-{split}-{Modality(modality).value}-{encoder[:16]}.npz"
        return self.root / name

    def get(
        self, encoder: str, dataset_id: str, split: str, modality: Union[Modality, str]
    ) -> Optional[np.ndarray]:
        path = self.path_for(encoder, dataset_id, split, modality)
        if not path.exists():
            return None
        with np.load(path) as data:
            if str(data["encoder"]) != encoder:
                return None
            return data["embeddings"].copy()

    def put(
        self,
        encoder: str,
        dataset_id: str,
        split: str,
        modality: Union[Modality, str],
        embeddings: np.ndarray,
    ) -> Path:
        path = self.path_for(encoder, dataset_id, split, modality)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, embeddings=embeddings, encoder=np.array(encoder))
        return path

    def get_or_compute(
        self,
        encoder: str,
        dataset_id: str,
        split: str,
        modality: Union[Modality, str],
        compute: Callable[[], np.ndarray],
    ) -> np.ndarray:
        cached = self.get(encoder, dataset_id, split, modality)
        if cached is not None:
            logger.debug(
                f"embedding cache hit: {dataset_id}/{split}/{Modality(modality).value}"
            )
            return cached
        embeddings = compute()
        self.put(encoder, dataset_id, split, modality, embeddings)
        return embeddings
