"""合成数据模块

配对语料、零样本标签数据集与探针任务数据集。
"""

from .acoustic import AcousticModel, render_frames, spec_augment_like
from .corpus import Corpus, gen_corpus, gen_eval_suite, load_corpus, save_corpus
from .language import BigramLanguage
from .probing import ProbingDataset, gen_probing_tasks, label_of, length_bucket
from .vocabulary import BOS_ID, EOS_ID, MASK_ID, PAD_ID, Vocabulary
from .zeroshot import ZeroShotDataset, gen_zeroshot_dataset

__all__ = [
    "AcousticModel",
    "render_frames",
    "spec_augment_like",
    "Corpus",
    "gen_corpus",
    "gen_eval_suite",
    "load_corpus",
    "save_corpus",
    "BigramLanguage",
    "ProbingDataset",
    "gen_probing_tasks",
    "label_of",
    "length_bucket",
    "BOS_ID",
    "EOS_ID",
    "MASK_ID",
    "PAD_ID",
    "Vocabulary",
    "ZeroShotDataset",
    "gen_zeroshot_dataset",
]
