"""探针任务数据集

五个任务，每个样本同时带 token 与渲染帧，使同一批句子可以探测两个编码器：

- LEN：句长分桶（6 类）
- CONTENT：20 个指定 token（每个非可互换类各 2 个）中出现了哪一个，恰好出现一次
- SHIFT：是否交换过一对相邻且不同的 token（2 类）
- MARKER：同一类别中 2 个标记 token 出现了哪一个，恰好出现一次
- PARITY：指定类别 token 个数的奇偶（2 类）

各划分类别均衡，句子在任务内跨划分不重复，且不出现在排除集合中。
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ..exceptions import DataGenerationError
from ..logger import get_logger
from ..types.configs import AcousticConfig, CorpusConfig, ProbingSizes
from ..types.enums import ProbingTask
from ..types.records import ProbingExample
from .acoustic import AcousticModel, render_frames
from .corpus import Sentence
from .language import BigramLanguage
from .vocabulary import Vocabulary

logger = get_logger(__name__)

N_LEN_BUCKETS = 6
CONTENT_PER_CLASS = 2
PARITY_CLASS = 2
MARKER_CLASS = 1
ATTEMPTS_PER_EXAMPLE = 500


def length_buckets(
    min_len: int, max_len: int, n_buckets: int = N_LEN_BUCKETS
) -> List[Tuple[int, ...]]:
    """把 [min_len, max_len] 切成 n_buckets 个连续区间"""
    lengths = np.arange(min_len, max_len + 1)
    if len(lengths) < n_buckets:
        raise DataGenerationError(
            f"length range [{min_len}, {max_len}] cannot form {n_buckets} buckets",
            generator="gen_probing_tasks",
        )
    return [
        tuple(int(x) for x in chunk) for chunk in np.array_split(lengths, n_buckets)
    ]


def length_bucket(
    length: int, min_len: int, max_len: int, n_buckets: int = N_LEN_BUCKETS
) -> int:
    for index, bucket in enumerate(length_buckets(min_len, max_len, n_buckets)):
        if length in bucket:
            return index
    raise DataGenerationError(
        f"length {length} outside [{min_len}, {max_len}]", generator="length_bucket"
    )


def content_tokens(vocab: Vocabulary) -> Tuple[int, ...]:
    return tuple(
        t for members in vocab.classes[1:] for t in members[:CONTENT_PER_CLASS]
    )


def marker_tokens(vocab: Vocabulary) -> Tuple[int, int]:
    members = vocab.classes[MARKER_CLASS]
    return members[CONTENT_PER_CLASS], members[CONTENT_PER_CLASS + 1]


def n_classes_for(task: ProbingTask, vocab: Vocabulary) -> int:
    return {
        ProbingTask.LEN: N_LEN_BUCKETS,
        ProbingTask.CONTENT: len(content_tokens(vocab)),
        ProbingTask.SHIFT: 2,
        ProbingTask.MARKER: 2,
        ProbingTask.PARITY: 2,
    }[task]


def label_of(
    task: ProbingTask,
    tokens: Sequence[int],
    vocab: Vocabulary,
    min_len: int,
    max_len: int,
) -> Optional[int]:
    """由 token 计算标签的真值规则；SHIFT 无法从句子本身判定，返回 None"""
    tokens = tuple(tokens)
    if task == ProbingTask.LEN:
        return length_bucket(len(tokens), min_len, max_len)
    if task == ProbingTask.CONTENT:
        designated = content_tokens(vocab)
        present = [t for t in tokens if t in designated]
        return designated.index(present[0]) if len(present) == 1 else None
    if task == ProbingTask.MARKER:
        markers = marker_tokens(vocab)
        present = [t for t in tokens if t in markers]
        return markers.index(present[0]) if len(present) == 1 else None
    if task == ProbingTask.PARITY:
        members = set(vocab.classes[PARITY_CLASS])
        return sum(t in members for t in tokens) % 2
    return None


@dataclass
class ProbingDataset:
    task: ProbingTask
    n_classes: int
    splits: Dict[str, List[ProbingExample]] = field(default_factory=dict)


class _Builder:
    """为一个任务按目标标签构造句子"""

    def __init__(
        self,
        task: ProbingTask,
        language: BigramLanguage,
        rng: np.random.Generator,
        min_len: int,
        max_len: int,
    ):
        self.task = task
        self.language = language
        self.vocab = language.vocab
        self.rng = rng
        self.min_len = min_len
        self.max_len = max_len

    def _sentence(self, length: Optional[int] = None) -> Sentence:
        if length is None:
            length = self.language.sample_length(self.rng, self.min_len, self.max_len)
        return self.language.sample_sentence(self.rng, length)

    def _place_unique(
        self, sentence: Sentence, target: int, forbidden: Sequence[int]
    ) -> Optional[Sentence]:
        """在一个同类位置（没有则任一位置）放入 target，并把其余 forbidden token 替换为同类的其他 token"""
        members = self.vocab.classes[self.vocab.class_of(target)]
        slots = [i for i, t in enumerate(sentence) if t in members]
        slots = slots or list(range(len(sentence)))
        chosen = slots[int(self.rng.integers(len(slots)))]
        tokens = list(sentence)
        tokens[chosen] = target
        for i, t in enumerate(tokens):
            if i == chosen or t not in forbidden:
                continue
            options = [
                m
                for m in self.vocab.classes[self.vocab.class_of(t)]
                if m not in forbidden
            ]
            tokens[i] = options[int(self.rng.integers(len(options)))]
        return tuple(tokens)

    def build(self, label: int) -> Optional[Tuple[Sentence, Optional[Sentence]]]:
        """返回 (句子, SHIFT 的源句子)；本次尝试失败返回 None"""
        if self.task == ProbingTask.LEN:
            bucket = length_buckets(self.min_len, self.max_len)[label]
            return self._sentence(bucket[int(self.rng.integers(len(bucket)))]), None
        if self.task == ProbingTask.CONTENT:
            designated = content_tokens(self.vocab)
            placed = self._place_unique(self._sentence(), designated[label], designated)
            return (placed, None) if placed is not None else None
        if self.task == ProbingTask.MARKER:
            markers = marker_tokens(self.vocab)
            placed = self._place_unique(self._sentence(), markers[label], markers)
            return (placed, None) if placed is not None else None
        if self.task == ProbingTask.PARITY:
            sentence = self._sentence()
            members = set(self.vocab.classes[PARITY_CLASS])
            odd = sum(t in members for t in sentence) % 2
            return (sentence, None) if odd == label else None
        # SHIFT
        source = self._sentence()
        if label == 0:
            return source, source
        pairs = [i for i in range(len(source) - 1) if source[i] != source[i + 1]]
        if not pairs:
            return None
        i = pairs[int(self.rng.integers(len(pairs)))]
        tokens = list(source)
        tokens[i], tokens[i + 1] = tokens[i + 1], tokens[i]
        return tuple(tokens), source


def gen_probing_task(
    task: ProbingTask,
    language: BigramLanguage,
    am: AcousticModel,
    seed: int,
    sizes: ProbingSizes,
    corpus_config: CorpusConfig,
    exclude: Set[Sentence],
    n_speakers: int = 20,
) -> ProbingDataset:
    task = ProbingTask(task)
    vocab = language.vocab
    n_classes = n_classes_for(task, vocab)
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, 707, list(ProbingTask).index(task)])
    )
    builder = _Builder(
        task, language, rng, corpus_config.min_len, corpus_config.max_len
    )
    seen: Set[Sentence] = set(exclude)
    dataset = ProbingDataset(task=task, n_classes=n_classes)

    for split_index, (split, size) in enumerate(
        (("train", sizes.n_train), ("valid", sizes.n_valid), ("test", sizes.n_test))
    ):
        labels = rng.permutation(np.arange(size) % n_classes)
        examples = []
        for index, label in enumerate(labels):
            for _ in range(ATTEMPTS_PER_EXAMPLE):
                built = builder.build(int(label))
                if built is None or built[0] in seen:
                    continue
                tokens, source = built
                break
            else:
                raise DataGenerationError(
                    f"{task.value}: cannot draw {size} distinct {split} examples for label {label}; "
                    "request exceeds the task's combinatorial capacity",
                    generator="gen_probing_tasks",
                )
            seen.add(tokens)
            speaker = int(rng.integers(n_speakers))
            render_seed = 7_000_000 + split_index * 100_000 + index
            examples.append(
                ProbingExample(
                    tokens=tokens,
                    label=int(label),
                    task=task,
                    frames=render_frames(tokens, speaker, am, render_seed),
                    speaker=speaker,
                    render_seed=render_seed,
                    source=source,
                )
            )
        dataset.splits[split] = examples
    return dataset


def gen_probing_tasks(
    seed: int,
    sizes: ProbingSizes,
    language: BigramLanguage,
    am: AcousticModel,
    corpus_config: Optional[CorpusConfig] = None,
    acoustic_config: Optional[AcousticConfig] = None,
    exclude: Optional[Set[Sentence]] = None,
    tasks: Optional[Sequence[ProbingTask]] = None,
) -> Dict[ProbingTask, ProbingDataset]:
    """生成全部探针任务

    帧用探针噪声（模拟 TTS 误差）渲染。

    Args:
        seed: 种子
        sizes: 每个划分的样本数
        language: 语言
        am: 声学模型
        corpus_config: 句长范围与说话人数
        acoustic_config: 取其中的探针噪声
        exclude: 不得出现的句子（训练语料）
        tasks: 要生成的任务，默认全部

    Returns:
        Dict[ProbingTask, ProbingDataset]: 每个任务的数据集
    """
    corpus_config = corpus_config or CorpusConfig()
    acoustic_config = acoustic_config or AcousticConfig()
    probe_am = am.with_noise(acoustic_config.probe_noise_sigma)
    result = {}
    for task in tasks or list(ProbingTask):
        result[ProbingTask(task)] = gen_probing_task(
            task,
            language,
            probe_am,
            seed,
            sizes,
            corpus_config,
            set(exclude or ()),
            corpus_config.n_speakers,
        )
        logger.debug(
            f"probing task {ProbingTask(task).value}: "
            f"{sizes.n_train}/{sizes.n_valid}/{sizes.n_test}"
        )
    return result

