"""配对语料的生成、落盘与加载

磁盘布局（每个划分一个目录）::

    <root>/corpus.toml                 种子与生成参数
    <root>/<split>/tokens.csv          每行一句，逗号分隔的 token id
    <root>/<split>/frames.bin          所有帧首尾相接，小端 fp32
    <root>/<split>/frames_index.csv    id,offset,n_frames,frame_dim
    <root>/<split>/manifest.csv        id,speaker,render_seed,tokens_path,frames_path,n_tokens,n_frames
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np
import toml

from ..exceptions import DataGenerationError
from ..logger import get_logger
from ..types.configs import AcousticConfig, CorpusConfig
from ..types.records import UtterancePair
from .acoustic import AcousticModel, render_frames
from .language import BigramLanguage
from .vocabulary import Vocabulary

logger = get_logger(__name__)

SPLITS = ("train", "valid", "test")
ATTEMPTS_PER_SENTENCE = 200

Sentence = Tuple[int, ...]


@dataclass
class Corpus:
    seed: int
    config: CorpusConfig
    acoustic_config: AcousticConfig
    vocab: Vocabulary
    language: BigramLanguage
    acoustic: AcousticModel
    splits: Dict[str, List[UtterancePair]] = field(default_factory=dict)

    def sentences(self, splits: Iterable[str] = SPLITS) -> Set[Sentence]:
        return {pair.tokens for name in splits for pair in self.splits.get(name, [])}

    @property
    def train(self) -> List[UtterancePair]:
        return self.splits["train"]

    @property
    def valid(self) -> List[UtterancePair]:
        return self.splits["valid"]

    @property
    def test(self) -> List[UtterancePair]:
        return self.splits["test"]


def build_world(
    seed: int, config: CorpusConfig, acoustic_config: AcousticConfig
) -> Tuple[Vocabulary, BigramLanguage, AcousticModel]:
    """由种子确定的词表、语言与声学模型"""
    vocab = Vocabulary(config.vocab_size, config.digit_class_size, config.class_size)
    language = BigramLanguage.from_seed(vocab, seed, config.transition_concentration)
    acoustic = AcousticModel.from_seed(config.vocab_size, acoustic_config, seed)
    return vocab, language, acoustic


def sample_unique_sentences(
    language: BigramLanguage,
    rng: np.random.Generator,
    count: int,
    min_len: int,
    max_len: int,
    seen: Set[Sentence],
    generator: str = "gen_corpus",
) -> List[Sentence]:
    """采样 count 个未出现在 seen 中的句子，并加入 seen"""
    sentences: List[Sentence] = []
    attempts = 0
    limit = ATTEMPTS_PER_SENTENCE * max(count, 1)
    while len(sentences) < count:
        attempts += 1
        if attempts > limit:
            raise DataGenerationError(
                f"could only draw {len(sentences)} of {count} distinct sentences; "
                f"request exceeds the capacity of lengths [{min_len}, {max_len}]",
                generator=generator,
            )
        sentence = language.sample_sentence(
            rng, language.sample_length(rng, min_len, max_len)
        )
        if sentence in seen:
            continue
        seen.add(sentence)
        sentences.append(sentence)
    return sentences


def render_pairs(
    sentences: List[Sentence],
    speakers: Iterable[int],
    am: AcousticModel,
    prefix: str,
    seed_offset: int = 0,
) -> List[UtterancePair]:
    pairs = []
    for index, (tokens, speaker) in enumerate(zip(sentences, speakers)):
        render_seed = seed_offset + index
        pairs.append(
            UtterancePair(
                id=f"{prefix}-{index:05d}",
                tokens=tokens,
                frames=render_frames(tokens, int(speaker), am, render_seed),
                speaker=int(speaker),
                render_seed=render_seed,
            )
        )
    return pairs


def gen_corpus(
    seed: int,
    config: Optional[CorpusConfig] = None,
    acoustic_config: Optional[AcousticConfig] = None,
    exclude: Optional[Set[Sentence]] = None,
) -> Corpus:
    """生成 train/valid/test 配对语料

    各划分的句子互不重复；exclude 中的句子不会被采样。

    Args:
        seed: 种子
        config: 语料参数（划分大小、句长范围、词表）
        acoustic_config: 声学渲染参数
        exclude: 额外排除的句子

    Returns:
        Corpus: 语料
    """
    config = config or CorpusConfig()
    acoustic_config = acoustic_config or AcousticConfig()
    if config.min_len < 1 or config.min_len > config.max_len:
        raise DataGenerationError(
            f"empty sentence length range [{config.min_len}, {config.max_len}]",
            generator="gen_corpus",
        )

    vocab, language, acoustic = build_world(seed, config, acoustic_config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 202]))
    seen: Set[Sentence] = set(exclude or ())
    corpus = Corpus(seed, config, acoustic_config, vocab, language, acoustic)
    sizes = {"train": config.n_train, "valid": config.n_valid, "test": config.n_test}
    for split_index, split in enumerate(SPLITS):
        sentences = sample_unique_sentences(
            language, rng, sizes[split], config.min_len, config.max_len, seen
        )
        speakers = rng.integers(0, config.n_speakers, size=len(sentences))
        corpus.splits[split] = render_pairs(
            sentences, speakers, acoustic, split, seed_offset=split_index * 1_000_000
        )
    logger.info(
        f"generated corpus seed={seed}: "
        + ", ".join(f"{split}={len(corpus.splits[split])}" for split in SPLITS)
    )
    return corpus


# ---------------------------------------------------------------------------
# 评估套件
# ---------------------------------------------------------------------------

UNSEEN_SPEAKER_BASE = 10_000


def gen_eval_suite(corpus: Corpus, seed: int) -> Dict[str, List[UtterancePair]]:
    """四个难度递增的配对测试集

    - clean: 语料测试集本身
    - other: 同样的句子，未见过的说话人，噪声取探针噪声
    - shifted: 另一条二元链生成的句子，未见过的说话人
    - far: shifted 的句子，更大噪声与更宽的时长范围
    """
    config = corpus.config
    rng = np.random.default_rng(np.random.SeedSequence([seed, 505]))
    n = len(corpus.test)
    unseen = UNSEEN_SPEAKER_BASE + np.arange(n)

    noisy = corpus.acoustic.with_noise(corpus.acoustic_config.probe_noise_sigma)
    other = render_pairs(
        [p.tokens for p in corpus.test], unseen, noisy, "other", seed_offset=3_000_000
    )

    shifted_language = BigramLanguage.from_seed(
        corpus.vocab, seed + 7919, config.transition_concentration
    )
    seen = corpus.sentences()
    sentences = sample_unique_sentences(
        shifted_language, rng, n, config.min_len, config.max_len, seen, "gen_eval_suite"
    )
    shifted = render_pairs(
        sentences, unseen, corpus.acoustic, "shifted", seed_offset=4_000_000
    )
    far_model = corpus.acoustic.with_noise(0.5).with_durations(
        corpus.acoustic.d_min, corpus.acoustic.d_max + 2
    )
    far = render_pairs(sentences, unseen + n, far_model, "far", seed_offset=5_000_000)
    return {"clean": list(corpus.test), "other": other, "shifted": shifted, "far": far}


# ---------------------------------------------------------------------------
# 落盘
# ---------------------------------------------------------------------------

def save_pairs(pairs: List[UtterancePair], directory: Union[str, Path]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "tokens.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        for pair in pairs:
            writer.writerow(pair.tokens)
    offset = 0
    index_path = directory / "frames_index.csv"
    manifest_path = directory / "manifest.csv"
    with open(directory / "frames.bin", "wb") as blob, open(
        index_path, "w", newline="", encoding="utf-8"
    ) as index_file, open(
        manifest_path, "w", newline="", encoding="utf-8"
    ) as manifest_file:
        index_writer = csv.writer(index_file)
        index_writer.writerow(["id", "offset", "n_frames", "frame_dim"])
        manifest = csv.writer(manifest_file)
        manifest.writerow(
            [
                "id",
                "speaker",
                "render_seed",
                "tokens_path",
                "frames_path",
                "n_tokens",
                "n_frames",
            ]
        )
        for pair in pairs:
            blob.write(pair.frames.astype("<f4").tobytes())
            index_writer.writerow(
                [pair.id, offset, pair.n_frames, pair.frames.shape[1]]
            )
            manifest.writerow(
                [
                    pair.id,
                    pair.speaker,
                    pair.render_seed,
                    "tokens.csv",
                    "frames.bin",
                    len(pair.tokens),
                    pair.n_frames,
                ]
            )
            offset += pair.n_frames


def load_pairs(directory: Union[str, Path]) -> List[UtterancePair]:
    directory = Path(directory)
    for name in ("tokens.csv", "frames.bin", "frames_index.csv", "manifest.csv"):
        if not (directory / name).exists():
            raise DataGenerationError(
                f"missing {name} in {directory}", generator="load_corpus"
            )
    with open(directory / "tokens.csv", newline="", encoding="utf-8") as f:
        token_rows = [tuple(int(t) for t in row) for row in csv.reader(f) if row]
    with open(directory / "frames_index.csv", newline="", encoding="utf-8") as f:
        index_rows = list(csv.DictReader(f))
    with open(directory / "manifest.csv", newline="", encoding="utf-8") as f:
        manifest_rows = list(csv.DictReader(f))
    if not len(token_rows) == len(index_rows) == len(manifest_rows):
        raise DataGenerationError(
            f"inconsistent row counts in {directory}", generator="load_corpus"
        )

    blob = np.frombuffer((directory / "frames.bin").read_bytes(), dtype="<f4")
    pairs = []
    for tokens, index_row, meta in zip(token_rows, index_rows, manifest_rows):
        n_frames, dim = int(index_row["n_frames"]), int(index_row["frame_dim"])
        start = int(index_row["offset"]) * dim
        frames = (
            blob[start:start + n_frames * dim].astype(np.float64).reshape(n_frames, dim)
        )
        pairs.append(
            UtterancePair(
                id=meta["id"],
                tokens=tokens,
                frames=frames,
                speaker=int(meta["speaker"]),
                render_seed=int(meta["render_seed"]),
            )
        )
    return pairs


def save_corpus(corpus: Corpus, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "seed": corpus.seed,
        "corpus": corpus.config.model_dump(mode="json"),
        "acoustic": corpus.acoustic_config.model_dump(mode="json"),
    }
    (directory / "corpus.toml").write_text(toml.dumps(header), encoding="utf-8")
    for split, pairs in corpus.splits.items():
        save_pairs(pairs, directory / split)
    logger.info(f"saved corpus to {directory}")
    return directory


def load_corpus(directory: Union[str, Path]) -> Corpus:
    """加载落盘的语料；词表、语言与声学模型由种子重建"""
    directory = Path(directory)
    header_path = directory / "corpus.toml"
    if not header_path.exists():
        raise DataGenerationError(
            f"no corpus.toml in {directory}", generator="load_corpus"
        )
    header = toml.loads(header_path.read_text(encoding="utf-8"))
    config = CorpusConfig.model_validate(header["corpus"])
    acoustic_config = AcousticConfig.model_validate(header["acoustic"])
    seed = int(header["seed"])
    vocab, language, acoustic = build_world(seed, config, acoustic_config)
    corpus = Corpus(seed, config, acoustic_config, vocab, language, acoustic)
    for split in SPLITS:
        if (directory / split).exists():
            corpus.splits[split] = load_pairs(directory / split)
    return corpus
