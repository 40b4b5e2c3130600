"""零样本分类数据集

三类数据集对应三种行为：
- digit-like：标签是可互换类中的单个 token（教师几乎无法区分它们）；
- word-like：标签是来自不同上下文类别的单个 token；
- sentence-like：标签是完整句子，每句由多个不同说话人各读一遍。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np

from ..exceptions import DataGenerationError
from ..types.configs import CorpusConfig, ZeroShotConfig
from ..types.enums import ZeroShotKind
from ..types.records import UtterancePair
from .acoustic import AcousticModel, render_frames
from .corpus import Sentence, sample_unique_sentences
from .language import BigramLanguage

ZEROSHOT_SPEAKER_BASE = 20_000


@dataclass
class ZeroShotDataset:
    kind: ZeroShotKind
    labels: List[Sentence]
    items: List[UtterancePair] = field(default_factory=list)
    truth: List[int] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.labels)


def _choose_labels(
    kind: ZeroShotKind,
    language: BigramLanguage,
    rng: np.random.Generator,
    n_classes: int,
    corpus_config: CorpusConfig,
    exclude: Set[Sentence],
) -> List[Sentence]:
    classes = language.vocab.classes
    if kind == ZeroShotKind.DIGIT_LIKE:
        members = classes[0]
        if n_classes > len(members):
            raise DataGenerationError(
                f"{n_classes} classes requested but the interchangeable class has {len(members)} tokens",
                generator="gen_zeroshot_dataset",
            )
        picked = sorted(rng.choice(len(members), size=n_classes, replace=False))
        return [(members[i],) for i in picked]
    if kind == ZeroShotKind.WORD_LIKE:
        context_classes = classes[1:]
        if n_classes > len(context_classes):
            raise DataGenerationError(
                f"{n_classes} classes requested but only {len(context_classes)} context classes exist",
                generator="gen_zeroshot_dataset",
            )
        picked = sorted(rng.choice(len(context_classes), size=n_classes, replace=False))
        return [
            (context_classes[i][int(rng.integers(len(context_classes[i])))],)
            for i in picked
        ]
    seen = set(exclude)
    return sample_unique_sentences(
        language,
        rng,
        n_classes,
        corpus_config.min_len,
        corpus_config.max_len,
        seen,
        "gen_zeroshot_dataset",
    )


def gen_zeroshot_dataset(
    kind: ZeroShotKind,
    language: BigramLanguage,
    am: AcousticModel,
    seed: int,
    config: Optional[ZeroShotConfig] = None,
    corpus_config: Optional[CorpusConfig] = None,
    exclude: Optional[Set[Sentence]] = None,
) -> ZeroShotDataset:
    """生成零样本数据集

    每个标签由 n_per_class 个互不相同的未见说话人各渲染一次；单 token 标签首尾加静音帧，
    使其长度超过学生编码器的感受野。

    Args:
        kind: 数据集类型
        language: 语言（提供词表与句子采样）
        am: 声学模型
        seed: 种子
        config: 类别数、每类样本数与静音帧数
        corpus_config: 句长范围（sentence-like）
        exclude: 不得作为标签的句子（训练语料）

    Returns:
        ZeroShotDataset: 数据集
    """
    kind = ZeroShotKind(kind)
    config = config or ZeroShotConfig()
    corpus_config = corpus_config or CorpusConfig()
    if config.n_classes < 2:
        raise DataGenerationError(
            "zero-shot datasets need at least 2 classes",
            generator="gen_zeroshot_dataset",
        )

    rng = np.random.default_rng(
        np.random.SeedSequence([seed, 606, list(ZeroShotKind).index(kind)])
    )
    labels = _choose_labels(
        kind, language, rng, config.n_classes, corpus_config, set(exclude or ())
    )
    silence = config.silence_frames if kind != ZeroShotKind.SENTENCE_LIKE else 0

    dataset = ZeroShotDataset(kind=kind, labels=labels)
    for label_index, label in enumerate(labels):
        for reading in range(config.n_per_class):
            speaker = ZEROSHOT_SPEAKER_BASE + reading
            render_seed = 6_000_000 + label_index * 1000 + reading
            dataset.items.append(
                UtterancePair(
                    id=f"{kind.value}-{label_index:02d}-{reading:02d}",
                    tokens=label,
                    frames=render_frames(
                        label, speaker, am, render_seed, silence=silence
                    ),
                    speaker=speaker,
                    render_seed=render_seed,
                )
            )
            dataset.truth.append(label_index)
    return dataset
