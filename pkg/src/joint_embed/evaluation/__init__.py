"""评估模块

检索、零样本分类、探针、级联基线、WER、趋势表、二维投影与报告输出。
"""

from .wer import corpus_wer, edit_distance, wer
from .cascade import CascadeResult, cascade_embed, clean_hypothesis
from .embedding import EmbeddingCache, embed_texts, embed_utterances, encoder_hash
from .probing import ProbeClassifier, evaluate_probing, probe, train_probe
from .projection import Projection2D, project_2d
from .reports import (
    MatrixSummary,
    load_summary,
    read_csv,
    report_row,
    summarize_matrix,
    write_csv,
    write_report,
)
from .retrieval import accuracy_from_similarity, evaluate_retrieval, retrieval_accuracy
from .zeroshot import evaluate_zeroshot, zero_shot_classify
from .trend import TrendTable, spearman_trend

__all__ = [
    "corpus_wer",
    "edit_distance",
    "wer",
    "CascadeResult",
    "cascade_embed",
    "clean_hypothesis",
    "EmbeddingCache",
    "embed_texts",
    "embed_utterances",
    "encoder_hash",
    "ProbeClassifier",
    "evaluate_probing",
    "probe",
    "train_probe",
    "Projection2D",
    "project_2d",
    "MatrixSummary",
    "load_summary",
    "read_csv",
    "report_row",
    "summarize_matrix",
    "write_csv",
    "write_report",
    "accuracy_from_similarity",
    "evaluate_retrieval",
    "retrieval_accuracy",
    "evaluate_zeroshot",
    "zero_shot_classify",
    "TrendTable",
    "spearman_trend",
]
