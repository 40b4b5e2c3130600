"""评估测试

WER、检索、零样本分类、探针、级联基线、二维投影、趋势与报告。
"""

import numpy as np
import pytest

from joint_embed.datagen import gen_zeroshot_dataset
from joint_embed.datagen.probing import ProbingDataset
from joint_embed.evaluation import (
    EmbeddingCache,
    accuracy_from_similarity,
    cascade_embed,
    clean_hypothesis,
    corpus_wer,
    embed_texts,
    embed_utterances,
    encoder_hash,
    evaluate_retrieval,
    evaluate_zeroshot,
    load_summary,
    probe,
    project_2d,
    read_csv,
    retrieval_accuracy,
    spearman_trend,
    summarize_matrix,
    train_probe,
    wer,
    write_report,
    zero_shot_classify,
)
from joint_embed.datagen.vocabulary import MASK_ID
from joint_embed.exceptions import EvaluationError
from joint_embed.types.configs import ProbeClassifierConfig
from joint_embed.types.enums import Direction, Modality, ProbingTask, ZeroShotKind
from joint_embed.types.records import ProbingExample
from joint_embed.types.reports import ReportSummary, RetrievalReport, TrendRow


def unit_rows(rng, n, dim):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.mark.unit
class TestWer:
    """词错误率测试"""

    def test_exact_match(self):
        """测试完全一致"""
        assert wer((5, 6, 7), (5, 6, 7)) == 0.0

    def test_one_substitution(self):
        """测试一次替换"""
        assert wer((5, 6, 7), (5, 6, 8)) == pytest.approx(1 / 3)

    def test_insertions_exceed_one(self):
        """测试插入导致 WER 大于 1"""
        assert wer((5,), (6, 7, 8)) == 3.0

    def test_deletions(self):
        """测试空假设"""
        assert wer((5, 6), ()) == 1.0

    def test_empty_reference(self):
        """测试空参考"""
        with pytest.raises(EvaluationError, match="empty reference"):
            wer((), (5,))

    def test_corpus_level(self):
        """测试语料级 WER 按参考长度加权"""
        assert corpus_wer([((5, 6, 7), (5, 6, 8)), ((5,), (5,))]) == pytest.approx(
            1 / 4
        )


@pytest.mark.unit
class TestRetrieval:
    """跨模态检索测试"""

    def test_self_retrieval(self, rng):
        """测试同一组嵌入互相检索准确率为 1"""
        embs = unit_rows(rng, 8, 5)
        report = evaluate_retrieval(embs, embs, "self")
        assert report.acc_t2s == 1.0
        assert report.acc_s2t == 1.0
        assert report.n == 8

    def test_asymmetric_example(self):
        """测试两个方向结果不同的 2×2 例子"""
        sim = np.array([[0.9, 0.1], [0.5, 0.3]])
        acc, margin = accuracy_from_similarity(sim, Direction.S2T)
        assert acc == 0.5
        assert margin == pytest.approx(0.5)
        acc, margin = accuracy_from_similarity(sim, Direction.T2S)
        assert acc == 1.0
        assert margin == pytest.approx(0.3)

    def test_ties_resolve_to_lowest_index(self):
        """测试并列时取最小下标"""
        sim = np.zeros((3, 3))
        acc, margin = accuracy_from_similarity(sim, "S->T")
        assert acc == pytest.approx(1 / 3)
        assert margin == 0.0

    def test_single_item_pool(self):
        """测试检索池只有一项"""
        speech, text = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
        assert retrieval_accuracy(speech, text, Direction.T2S) == (1.0, 0.0)

    def test_non_unit_rows(self, rng):
        """测试非单位向量"""
        embs = unit_rows(rng, 4, 3)
        with pytest.raises(EvaluationError, match="unit norm"):
            retrieval_accuracy(embs * 2.0, embs, Direction.T2S)

    def test_shuffled_pairs_at_chance(self):
        """测试配对被打乱（两组独立）时准确率接近 1/n"""
        rng = np.random.default_rng(7)
        n = 1000
        speech, text = unit_rows(rng, n, 16), unit_rows(rng, n, 16)
        for direction in (Direction.T2S, Direction.S2T):
            acc, _ = retrieval_accuracy(speech, text, direction)
            assert 0.0 <= acc <= 8.0 / n

    def test_common_row_permutation(self, rng):
        """测试两组嵌入按同一置换重排时结果不变"""
        speech = unit_rows(rng, 30, 6)
        noisy = speech + 0.8 * rng.standard_normal((30, 6))
        text = noisy / np.linalg.norm(noisy, axis=1, keepdims=True)
        order = rng.permutation(30)
        for direction in (Direction.T2S, Direction.S2T):
            acc, margin = retrieval_accuracy(speech, text, direction)
            acc_perm, margin_perm = retrieval_accuracy(
                speech[order], text[order], direction
            )
            assert acc_perm == acc
            assert margin_perm == pytest.approx(margin)

    def test_mismatched_shapes(self, rng):
        """测试两组嵌入大小不一致"""
        with pytest.raises(EvaluationError, match="differ"):
            retrieval_accuracy(
                unit_rows(rng, 4, 3), unit_rows(rng, 5, 3), Direction.S2T
            )


@pytest.mark.unit
class TestZeroShot:
    """零样本分类测试"""

    def test_orthonormal_labels(self):
        """测试语音嵌入等于标签嵌入时全部正确"""
        labels = np.eye(3)
        speech = np.repeat(labels, 2, axis=0)
        report = zero_shot_classify(speech, labels, [0, 0, 1, 1, 2, 2])
        assert report.accuracy == 1.0
        assert report.confusion == [[2, 0, 0], [0, 2, 0], [0, 0, 2]]
        assert report.mean_label_cosine == pytest.approx(0.0)

    def test_orthogonal_speech_goes_to_first_label(self):
        """测试与所有标签正交的语音归为标签 0"""
        labels = np.eye(3)[:2]
        speech = np.array([[0.0, 0.0, 1.0]])
        report = zero_shot_classify(speech, labels, [1])
        assert report.confusion == [[0, 0], [1, 0]]
        assert report.accuracy == 0.0

    def test_duplicate_labels_warn(self):
        """测试标签嵌入重合时给出警告"""
        labels = np.array([[1.0, 0.0], [1.0, 0.0]])
        report = zero_shot_classify(np.array([[1.0, 0.0]]), labels, [1])
        assert report.warnings == ["labels 0 and 1 have identical embeddings"]

    def test_invalid_inputs(self):
        """测试标签数不足与真值越界"""
        with pytest.raises(EvaluationError, match="at least 2 labels"):
            zero_shot_classify(np.eye(2)[:1], np.eye(2)[:1], [0])
        with pytest.raises(EvaluationError, match="truth labels"):
            zero_shot_classify(np.eye(2), np.eye(2), [0, 2])

    def test_evaluate_with_bundle(self, tiny_bundle, tiny_config, tiny_corpus):
        """测试用模型组嵌入后分类"""
        dataset = gen_zeroshot_dataset(
            ZeroShotKind.SENTENCE_LIKE,
            tiny_corpus.language,
            tiny_corpus.acoustic,
            2,
            tiny_config.zeroshot,
            tiny_config.corpus,
        )
        report = evaluate_zeroshot(tiny_bundle, dataset)
        assert report.n == len(dataset.items)
        assert report.kind == ZeroShotKind.SENTENCE_LIKE
        assert 0.0 <= report.accuracy <= 1.0


@pytest.mark.unit
class TestProbe:
    """探针分类器测试"""

    def _dataset(self, n_train=20):
        def examples(n):
            return [
                ProbingExample(tokens=(4 + i,), label=i % 2, task=ProbingTask.PARITY)
                for i in range(n)
            ]

        return ProbingDataset(
            task=ProbingTask.PARITY,
            n_classes=2,
            splits={
                "train": examples(n_train),
                "valid": examples(6),
                "test": examples(6),
            },
        )

    @staticmethod
    def _embed(n):
        x = np.zeros((n, 4))
        x[np.arange(n), np.arange(n) % 2] = 1.0
        return x

    def test_class_collapse(self):
        """测试训练标签只有一个类别"""
        with pytest.raises(EvaluationError, match="class collapse"):
            train_probe(
                np.ones((4, 3)),
                np.zeros(4),
                np.ones((2, 3)),
                np.zeros(2),
                2,
                ProbeClassifierConfig(),
            )

    def test_same_classifier_scores_both_modalities(self):
        """测试同一个分类器给两种模态打分"""
        config = ProbeClassifierConfig(hidden_dim=8, epochs=30, lr=1e-2, batch_size=4)
        dataset = self._dataset()
        text = {
            "train": self._embed(20),
            "valid": self._embed(6),
            "test": self._embed(6),
        }
        report = probe(dataset, text, text["test"], 1.0 - text["test"], config)
        assert report.text_acc == 1.0
        assert report.speech_acc_before == report.text_acc
        assert len(report.classifier_hash) == 64
        assert 1 <= report.best_epoch <= 30

    def test_training_is_deterministic(self):
        """测试相同种子训练结果一致"""
        config = ProbeClassifierConfig(hidden_dim=4, epochs=3, batch_size=4)
        x, y = self._embed(12), np.arange(12) % 2
        first, _ = train_probe(x, y, x, y, 2, config)
        second, _ = train_probe(x, y, x, y, 2, config)
        assert first.digest() == second.digest()

    def test_random_labels_at_chance(self):
        """测试标签与嵌入无关时测试准确率在机会水平的 4σ 内"""
        rng = np.random.default_rng(11)
        n, n_classes = 400, 4
        splits = ("train", "valid", "test")
        x = {split: rng.standard_normal((n, 8)) for split in splits}
        y = {split: rng.integers(0, n_classes, size=n) for split in splits}
        config = ProbeClassifierConfig(hidden_dim=8, epochs=5, lr=1e-2, batch_size=32)
        classifier, _ = train_probe(
            x["train"], y["train"], x["valid"], y["valid"], n_classes, config
        )
        chance = 1.0 / n_classes
        sigma = np.sqrt(chance * (1.0 - chance) / n)
        assert abs(classifier.accuracy(x["test"], y["test"]) - chance) < 4 * sigma

    def test_row_count_mismatch(self):
        """测试语音嵌入行数与测试集不符"""
        dataset = self._dataset()
        text = {
            "train": self._embed(20),
            "valid": self._embed(6),
            "test": self._embed(6),
        }
        with pytest.raises(EvaluationError, match="speech_before"):
            probe(
                dataset, text, self._embed(5), self._embed(6), ProbeClassifierConfig()
            )


@pytest.mark.unit
class TestCascade:
    """级联基线测试"""

    def test_clean_terminated(self):
        """测试正常终止的转写不做修补"""
        assert clean_hypothesis((5, 6), True, 8) == ((5, 6), [])

    def test_empty_unterminated(self):
        """测试空且未终止的转写"""
        tokens, flags = clean_hypothesis((), False, 8)
        assert tokens == (MASK_ID,)
        assert flags == ["unterminated", "empty"]

    def test_truncated(self):
        """测试超长转写截断"""
        tokens, flags = clean_hypothesis(tuple(range(4, 14)), True, 8)
        assert len(tokens) == 8
        assert flags == ["truncated"]

    def test_cascade_embed(self, tiny_bundle, tiny_corpus, tiny_config):
        """测试级联嵌入的形状与修补记录"""
        frames = [pair.frames for pair in tiny_corpus.test[:3]]
        result = cascade_embed(frames, tiny_bundle, batch_size=2)
        assert result.embeddings.shape == (3, tiny_config.text.dim_t)
        assert len(result.hypotheses) == len(result.flags) == 3
        assert all(1 <= len(h) <= tiny_config.text.max_len for h in result.hypotheses)
        np.testing.assert_allclose(
            np.linalg.norm(result.embeddings, axis=1), 1.0, atol=1e-9
        )

    def test_exact_transcription_matches_text_pipeline(
        self, tiny_bundle, tiny_corpus, mocker
    ):
        """测试识别完全正确时级联嵌入等于文本嵌入，检索准确率为 1"""
        pairs, seen = [], set()
        for pair in [*tiny_corpus.train, *tiny_corpus.test]:
            if tuple(pair.tokens) not in seen:
                seen.add(tuple(pair.tokens))
                pairs.append(pair)
        transcripts = {id(pair.frames): tuple(pair.tokens) for pair in pairs}
        mocker.patch(
            "joint_embed.evaluation.cascade.greedy_decode_batch",
            side_effect=lambda bundle, batch: [
                (transcripts[id(frames)], True) for frames in batch
            ],
        )
        result = cascade_embed(
            [pair.frames for pair in pairs], tiny_bundle, batch_size=3
        )
        text = embed_texts(tiny_bundle, [tuple(pair.tokens) for pair in pairs])
        assert result.n_flagged == 0
        np.testing.assert_allclose(result.embeddings, text, atol=1e-12)
        report = evaluate_retrieval(result.embeddings, text, "cascade-exact")
        assert report.acc_t2s == 1.0
        assert report.acc_s2t == 1.0


@pytest.mark.unit
class TestEmbedding:
    """批量嵌入与缓存测试"""

    def test_threads_do_not_change_results(self, tiny_bundle, tiny_corpus):
        """测试多线程嵌入与单线程一致"""
        seqs = [pair.tokens for pair in tiny_corpus.train]
        frames = [pair.frames for pair in tiny_corpus.train]
        np.testing.assert_array_equal(
            embed_texts(tiny_bundle, seqs, batch_size=3, threads=1),
            embed_texts(tiny_bundle, seqs, batch_size=3, threads=3),
        )
        np.testing.assert_array_equal(
            embed_utterances(tiny_bundle, frames, batch_size=5, threads=1),
            embed_utterances(tiny_bundle, frames, batch_size=5, threads=2),
        )

    def test_nothing_to_embed(self, tiny_bundle):
        """测试空输入"""
        with pytest.raises(EvaluationError, match="nothing to embed"):
            embed_texts(tiny_bundle, [])

    def test_encoder_hash_tracks_parameters(self, tiny_bundle):
        """测试编码器哈希随参数变化"""
        before = encoder_hash(tiny_bundle, Modality.SPEECH)
        text_before = encoder_hash(tiny_bundle, "text")
        tiny_bundle.projection.fc1.weight.data[0, 0] += 1.0
        assert encoder_hash(tiny_bundle, Modality.SPEECH) != before
        assert encoder_hash(tiny_bundle, Modality.TEXT) == text_before

    def test_cache_round_trip(self, tmp_path, rng):
        """测试缓存命中与编码器不符时失效"""
        cache = EmbeddingCache(tmp_path)
        embs = rng.standard_normal((4, 3))
        assert cache.get("a" * 64, "ds", "test", Modality.TEXT) is None
        cache.put("a" * 64, "ds", "test", Modality.TEXT, embs)
        np.testing.assert_array_equal(cache.get("a" * 64, "ds", "test", "text"), embs)
        assert cache.get("a" * 16 + "b" * 48, "ds", "test", Modality.TEXT) is None

    def test_get_or_compute_calls_once(self, tmp_path, rng):
        """测试缓存存在时不再计算"""
        cache = EmbeddingCache(tmp_path)
        calls = []
        embs = rng.standard_normal((2, 2))

        def compute():
            calls.append(1)
            return embs

        cache.get_or_compute("k" * 64, "ds", "train", Modality.SPEECH, compute)
        again = cache.get_or_compute("k" * 64, "ds", "train", Modality.SPEECH, compute)
        assert len(calls) == 1
        np.testing.assert_array_equal(again, embs)


@pytest.mark.unit
class TestProjection:
    """二维投影测试"""

    def test_recovers_planar_data(self):
        """测试平面内数据被精确还原"""
        x = np.array([-2.0, -1.0, 1.0, 2.0])
        y = np.array([1.0, -1.0, -1.0, 1.0])
        embeddings = np.stack([x, y, np.zeros(4)], axis=1)
        result = project_2d(embeddings, ["a", "b", "c", "d"])
        np.testing.assert_allclose(result.points, np.stack([x, y], axis=1), atol=1e-10)
        assert result.variance_explained == pytest.approx(1.0)
        assert not result.rank_deficient
        assert result.modalities == ["speech"] * 4

    def test_rank_deficient(self):
        """测试共线数据第二坐标为零"""
        t = np.array([0.0, 1.0, 2.0, 3.0])
        embeddings = np.stack([t, 2 * t, np.zeros(4)], axis=1)
        result = project_2d(embeddings, [0, 1, 2, 3], ["text"] * 4)
        assert result.rank_deficient
        np.testing.assert_array_equal(result.points[:, 1], 0.0)
        assert result.variance_explained == pytest.approx(1.0)

    def test_sign_convention(self, rng):
        """测试缩放数据后坐标按比例缩放，轴的符号保持不变"""
        embeddings = rng.standard_normal((6, 4))
        a = project_2d(embeddings, list(range(6))).points
        b = project_2d(embeddings * 3.0, list(range(6))).points
        np.testing.assert_allclose(b, 3.0 * a, atol=1e-9)

    def test_variance_explained_matches_eigvalsh(self, rng):
        """测试满秩点云的方差解释比例等于协方差前两个特征值之比"""
        embeddings = rng.standard_normal((50, 5)) * np.array([3.0, 2.0, 1.0, 0.5, 0.25])
        result = project_2d(embeddings, list(range(50)))
        centered = embeddings - embeddings.mean(axis=0)
        eigenvalues = np.linalg.eigvalsh(centered.T @ centered)
        assert result.variance_explained == pytest.approx(
            eigenvalues[-2:].sum() / eigenvalues.sum()
        )
        assert not result.rank_deficient

    def test_one_dimensional_embeddings(self):
        """测试一维嵌入第二坐标为零"""
        result = project_2d(np.array([[1.0], [2.0], [4.0]]), ["a", "b", "c"])
        assert result.rank_deficient
        np.testing.assert_allclose(result.points[:, 0], [-4 / 3, -1 / 3, 5 / 3])
        np.testing.assert_array_equal(result.points[:, 1], 0.0)
        assert result.variance_explained == pytest.approx(1.0)

    def test_zero_dimension(self):
        """测试没有嵌入维度"""
        with pytest.raises(EvaluationError, match="at least one embedding dimension"):
            project_2d(np.zeros((3, 0)), [0, 1, 2])

    def test_too_few_points(self):
        """测试少于三个点"""
        with pytest.raises(EvaluationError, match="at least 3 points"):
            project_2d(np.eye(2), [0, 1])

    def test_rows(self):
        """测试 CSV 行"""
        result = project_2d(np.eye(3), ["x", "y", "z"])
        assert [row["class"] for row in result.rows()] == ["x", "y", "z"]


@pytest.mark.unit
class TestReports:
    """报告与矩阵汇总测试"""

    @staticmethod
    def _report(t2s, s2t, n=10):
        return RetrievalReport(dataset_id="test", n=n, acc_t2s=t2s, acc_s2t=s2t)

    def test_matrix_checks(self):
        """测试种子均值与排序性质"""
        results = [
            ("A", 0, self._report(0.3, 0.2)),
            ("A", 1, self._report(0.5, 0.4)),
            ("B", 0, self._report(0.5, 0.5)),
            ("F", 0, self._report(0.6, 0.7)),
            ("D", 0, self._report(0.4, 0.3)),
            ("E", 0, self._report(0.4, 0.3)),
            ("G", 0, self._report(0.2, 0.1)),
            ("I", 0, self._report(0.7, 0.7)),
        ]
        summary = summarize_matrix(results)
        assert summary.means["A"]["acc_t2s"] == pytest.approx(0.4)
        assert summary.means["A"]["n_seeds"] == 2
        checks = {check.name: check.holds for check in summary.checks}
        assert checks["G <= 3/n"]
        assert checks["A < B"]
        assert checks["B <= F"]
        assert not checks["D < E"]
        assert checks["I >= F"]
        assert not checks["T->S >= S->T [F]"]
        assert checks["T->S >= S->T [B]"]
        assert "H <= 3/n" not in checks

    def test_empty_matrix(self):
        """测试没有结果"""
        with pytest.raises(EvaluationError):
            summarize_matrix([])

    def test_write_report(self, tmp_path):
        """测试 CSV 与 JSON 摘要"""
        rows = [
            {"scenario_id": "A", "acc_t2s": 0.5},
            {"scenario_id": "B", "acc_t2s": 0.75},
        ]
        summary = ReportSummary(kind="retrieval", seed=3, metrics={"mean": 0.625})
        csv_path, json_path = write_report(tmp_path / "retrieval.csv", rows, summary)
        assert json_path.suffix == ".json"
        assert read_csv(csv_path) == [
            {"scenario_id": "A", "acc_t2s": "0.5"},
            {"scenario_id": "B", "acc_t2s": "0.75"},
        ]
        assert load_summary(csv_path) == summary


@pytest.mark.unit
class TestTrend:
    """WER 趋势测试"""

    def test_monotone(self):
        """测试 WER 越低准确率越高时相关为 1"""
        rows = [
            TrendRow(checkpoint_step=s, wer=w, acc_t2s=a, acc_s2t=a)
            for s, w, a in ((1, 0.9, 0.1), (2, 0.5, 0.3), (3, 0.2, 0.6))
        ]
        assert spearman_trend(rows) == pytest.approx(1.0)

    def test_constant_column(self):
        """测试常数列时无定义"""
        rows = [
            TrendRow(checkpoint_step=s, wer=0.5, acc_t2s=a, acc_s2t=a)
            for s, a in ((1, 0.1), (2, 0.3))
        ]
        assert spearman_trend(rows) is None
        assert spearman_trend(rows[:1]) is None
