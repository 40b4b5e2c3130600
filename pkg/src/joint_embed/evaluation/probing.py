"""探针分类器

每个任务只训练一个分类器：在教师文本嵌入上训练、按验证准确率选轮次，
然后用同一个分类器分别给文本测试嵌入和对应语音嵌入打分。
分类器参数哈希在两次打分前后各记录一次，以证明复用。
"""

import hashlib
from typing import Dict, Optional, Tuple

import numpy as np

from ..core import functional as F
from ..core.optim import Adam
from ..core.tensor import (
    Tensor,
    backward,
    current_tape,
    eval_mode,
    inference_mode,
    set_dropout_stream,
)
from ..datagen.probing import ProbingDataset
from ..exceptions import EvaluationError
from ..logger import get_logger
from ..models.bundle import ModelBundle
from ..models.layers import Dropout, Linear, Module
from ..types.configs import ProbeClassifierConfig
from ..types.enums import Modality
from ..types.reports import ProbingReport
from .embedding import EmbeddingCache, embed_texts, embed_utterances, encoder_hash

logger = get_logger(__name__)


class ProbeClassifier(Module):
    """Linear → tanh → Dropout → Linear"""

    def __init__(
        self,
        in_dim: int,
        n_classes: int,
        config: ProbeClassifierConfig,
        rng: np.random.Generator,
    ):
        self.hidden = Linear(in_dim, config.hidden_dim, rng)
        self.dropout = Dropout(config.dropout_rate)
        self.output = Linear(config.hidden_dim, n_classes, rng)
        self.assign_names("probe.")

    def forward(self, x: Tensor) -> Tensor:
        return self.output(self.dropout(F.tanh(self.hidden(x))))

    def predict(self, x: np.ndarray) -> np.ndarray:
        with inference_mode():
            return np.argmax(self(Tensor(x)).data, axis=-1)

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, param in self.named_parameters():
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(param.data).tobytes())
        return h.hexdigest()


def train_probe(
    train_x: np.ndarray,
    train_y: np.ndarray,
    valid_x: np.ndarray,
    valid_y: np.ndarray,
    n_classes: int,
    config: ProbeClassifierConfig,
) -> Tuple[ProbeClassifier, int]:
    """训练探针分类器，返回载入最佳验证轮次参数的分类器与该轮次

    Raises:
        EvaluationError: 训练标签只有一个类别
    """
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(np.unique(train_y)) < 2:
        raise EvaluationError(
            "class collapse: training labels contain a single class", instrument="probe"
        )
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 606]))
    classifier = ProbeClassifier(train_x.shape[1], n_classes, config, rng)
    optimizer = Adam(classifier.parameters())

    best_state: Optional[Dict[str, np.ndarray]] = None
    best_acc, best_epoch, step = -1.0, 0, 0
    for epoch in range(1, config.epochs + 1):
        seq = np.random.SeedSequence([config.seed, 607, epoch])
        shuffle = np.random.default_rng(seq)
        order = shuffle.permutation(len(train_x))
        for start in range(0, len(order), config.batch_size):
            index = order[start:start + config.batch_size]
            step += 1
            current_tape().clear()
            set_dropout_stream(config.seed, step)
            with eval_mode(False):
                loss = F.cross_entropy_label_smoothed(
                    classifier(Tensor(train_x[index])), train_y[index], 0.0
                )
                optimizer.zero_grad()
                backward(loss)
                optimizer.step(config.lr)
        accuracy = classifier.accuracy(valid_x, valid_y)
        if accuracy > best_acc:
            best_acc, best_epoch, best_state = accuracy, epoch, classifier.state_dict()
    classifier.load_state_dict(best_state)
    return classifier, best_epoch


def _labels(dataset: ProbingDataset, split: str) -> np.ndarray:
    return np.array(
        [example.label for example in dataset.splits[split]], dtype=np.int64
    )


def probe(
    dataset: ProbingDataset,
    text_embs: Dict[str, np.ndarray],
    speech_before: np.ndarray,
    speech_after: np.ndarray,
    config: ProbeClassifierConfig,
) -> ProbingReport:
    """训练一个分类器并在三组测试嵌入上打分

    Args:
        dataset: 探针数据集
        text_embs: train/valid/test 三个划分的教师嵌入
        speech_before: 测试集语音嵌入（对齐前的学生）
        speech_after: 测试集语音嵌入（对齐后的学生）
        config: 分类器配置

    Returns:
        ProbingReport: 文本准确率与对齐前后的语音准确率
    """
    test_y = _labels(dataset, "test")
    for name, embs in (
        ("speech_before", speech_before),
        ("speech_after", speech_after),
    ):
        if len(embs) != len(test_y):
            raise EvaluationError(
                f"{name} has {len(embs)} rows for {len(test_y)} test examples",
                instrument="probe",
            )
    classifier, best_epoch = train_probe(
        text_embs["train"],
        _labels(dataset, "train"),
        text_embs["valid"],
        _labels(dataset, "valid"),
        dataset.n_classes,
        config,
    )
    digest = classifier.digest()
    logger.info(
        f"probe {dataset.task.value}: classifier {digest[:12]} "
        f"(best epoch {best_epoch})"
    )
    text_acc = classifier.accuracy(text_embs["test"], test_y)
    before = classifier.accuracy(speech_before, test_y)
    after = classifier.accuracy(speech_after, test_y)
    if classifier.digest() != digest:
        raise EvaluationError(
            "probe classifier changed between modalities", instrument="probe"
        )
    report = ProbingReport(
        task=dataset.task.value,
        n_classes=dataset.n_classes,
        text_acc=text_acc,
        speech_acc_before=before,
        speech_acc_after=after,
        classifier_hash=digest,
        best_epoch=best_epoch,
    )
    logger.info(
        f"probe {report.task}: text {text_acc:.4f}  speech {before:.4f} -> {after:.4f} "
        f"(classifier {digest[:12]} reused)"
    )
    return report


def evaluate_probing(
    dataset: ProbingDataset,
    bundle_before: ModelBundle,
    bundle_after: ModelBundle,
    config: ProbeClassifierConfig,
    cache: Optional[EmbeddingCache] = None,
    threads: int = 1,
) -> ProbingReport:
    """计算（或从缓存读取）冻结编码器的嵌入后运行探针

    文本嵌入取自 bundle_after 的教师（教师在联合训练中冻结，两组相同）。
    """
    dataset_id = f"probe-{dataset.task.value}"

    def cached(key: str, split: str, modality: Modality, compute) -> np.ndarray:
        if cache is None:
            return compute()
        return cache.get_or_compute(key, dataset_id, split, modality, compute)

    text_key = encoder_hash(bundle_after, Modality.TEXT)
    text_embs = {
        split: cached(
            text_key,
            split,
            Modality.TEXT,
            lambda split=split: embed_texts(
                bundle_after,
                [e.tokens for e in dataset.splits[split]],
                threads=threads,
            ),
        )
        for split in ("train", "valid", "test")
    }
    test_frames = [example.frames for example in dataset.splits["test"]]
    speech = {}
    for label, bundle in (("before", bundle_before), ("after", bundle_after)):
        speech[label] = cached(
            encoder_hash(bundle, Modality.SPEECH),
            "test",
            Modality.SPEECH,
            lambda bundle=bundle: embed_utterances(
                bundle, test_frames, threads=threads
            ),
        )
    return probe(dataset, text_embs, speech["before"], speech["after"], config)
