"""合成数据测试

词表、声学渲染、配对语料、零样本数据集与探针任务。
"""

import numpy as np
import pytest

from joint_embed.core import eval_mode
from joint_embed.datagen import (
    AcousticModel,
    Vocabulary,
    gen_corpus,
    gen_eval_suite,
    gen_zeroshot_dataset,
    gen_probing_tasks,
    label_of,
    length_bucket,
    load_corpus,
    render_frames,
    save_corpus,
    spec_augment_like,
)
from joint_embed.datagen.probing import content_tokens, marker_tokens
from joint_embed.exceptions import DataGenerationError
from joint_embed.types.configs import AcousticConfig, ProbingSizes, ZeroShotConfig
from joint_embed.types.enums import ProbingTask, ZeroShotKind


@pytest.mark.unit
class TestVocabulary:
    """词表测试"""

    def test_class_layout(self):
        """测试类别划分，余数并入最后一类"""
        vocab = Vocabulary(24, digit_class_size=6, class_size=4)
        sizes = [len(c) for c in vocab.classes]
        assert sizes == [6, 4, 4, 6]
        assert vocab.classes[0][0] == 4
        assert sum(sizes) == len(vocab.content_ids)

    def test_class_of(self):
        """测试 token 所属类别"""
        vocab = Vocabulary(24, digit_class_size=6, class_size=4)
        assert vocab.class_of(4) == 0
        assert vocab.class_of(10) == 1
        with pytest.raises(DataGenerationError):
            vocab.class_of(2)

    def test_too_small(self):
        """测试词表过小"""
        with pytest.raises(DataGenerationError, match="too small"):
            Vocabulary(12, digit_class_size=6, class_size=4)


@pytest.mark.unit
class TestAcoustic:
    """声学渲染测试"""

    def _model(self, noise=0.0, channel=0.0):
        config = AcousticConfig(
            frame_dim=4, d_min=2, d_max=3, noise_sigma=noise, channel_scale=channel
        )
        return AcousticModel.from_seed(24, config, seed=11)

    def test_noiseless_identity_channel_gives_prototypes(self):
        """测试无噪声恒等信道下帧等于原型的重复"""
        am = self._model()
        frames = render_frames((5, 7), speaker=0, am=am, durations=[2, 3])
        expected = np.repeat(am.prototypes[[5, 7]], [2, 3], axis=0)
        np.testing.assert_array_equal(frames, expected)

    def test_frame_count_within_duration_law(self):
        """测试帧数位于时长分布范围内"""
        am = self._model(noise=0.1, channel=0.1)
        for seed in range(10):
            frames = render_frames((5, 6, 7, 8), speaker=1, am=am, render_seed=seed)
            assert 4 * 2 <= frames.shape[0] <= 4 * 3
            assert frames.shape[1] == 4

    def test_rerender_is_reproducible(self):
        """测试相同坐标重渲染逐位一致"""
        am = self._model(noise=0.3, channel=0.2)
        a = render_frames((5, 9, 12), speaker=3, am=am, render_seed=42)
        b = render_frames((5, 9, 12), speaker=3, am=am, render_seed=42)
        assert a.tobytes() == b.tobytes()

    def test_silence_padding(self):
        """测试首尾静音帧"""
        am = self._model()
        frames = render_frames((5,), speaker=0, am=am, silence=2, durations=[2])
        assert frames.shape[0] == 6
        np.testing.assert_array_equal(frames[:2], 0.0)

    def test_invalid_tokens(self):
        """测试空序列与越界 token"""
        am = self._model()
        with pytest.raises(DataGenerationError):
            render_frames((), speaker=0, am=am)
        with pytest.raises(DataGenerationError, match="outside acoustic vocabulary"):
            render_frames((30,), speaker=0, am=am)


@pytest.mark.unit
class TestSpecAugment:
    """时间/通道掩码测试"""

    def test_zero_maxima_is_identity(self, rng):
        """测试掩码上限为零时恒等"""
        frames = rng.standard_normal((10, 4))
        np.testing.assert_array_equal(spec_augment_like(frames, 0, 0, seed=1), frames)

    def test_eval_mode_is_identity(self, rng):
        """测试 eval 模式下恒等"""
        frames = rng.standard_normal((10, 4))
        with eval_mode(True):
            np.testing.assert_array_equal(
                spec_augment_like(frames, 4, 2, seed=1), frames
            )

    def test_shape_preserved_and_bands_zeroed(self, rng):
        """测试形状不变且只清零不修改"""
        frames = rng.standard_normal((10, 4)) + 5.0
        out = spec_augment_like(frames, 4, 2, seed=[3, 4])
        assert out.shape == frames.shape
        changed = out != frames
        assert np.all(out[changed] == 0.0)
        np.testing.assert_array_equal(out, spec_augment_like(frames, 4, 2, seed=[3, 4]))

    def test_expected_zeroed_fraction(self):
        """测试 1 万个种子上的平均清零比例与解析期望相差不超过 2%"""
        time, channels, time_max, channel_max = 20, 8, 4, 3
        frames = np.ones((time, channels))
        mean_t, mean_c = time_max / 2.0, channel_max / 2.0
        expected = (
            mean_t / time + mean_c / channels - mean_t * mean_c / (time * channels)
        )
        zeroed = [
            np.mean(spec_augment_like(frames, time_max, channel_max, seed=seed) == 0.0)
            for seed in range(10000)
        ]
        assert np.mean(zeroed) == pytest.approx(expected, rel=0.02)

    def test_maxima_exceed_extents(self, rng):
        """测试掩码上限超过范围"""
        with pytest.raises(DataGenerationError, match="exceed extents"):
            spec_augment_like(rng.standard_normal((3, 4)), 4, 1, seed=0)


@pytest.mark.unit
class TestCorpus:
    """配对语料测试"""

    def test_deterministic(self, tiny_config, tiny_corpus):
        """测试相同种子生成相同语料"""
        again = gen_corpus(tiny_config.seed, tiny_config.corpus, tiny_config.acoustic)
        for split in ("train", "valid", "test"):
            for a, b in zip(tiny_corpus.splits[split], again.splits[split]):
                assert a.tokens == b.tokens
                assert a.frames.tobytes() == b.frames.tobytes()

    def test_split_sizes_and_disjointness(self, tiny_config, tiny_corpus):
        """测试划分大小与句子不重复"""
        assert len(tiny_corpus.train) == tiny_config.corpus.n_train
        assert len(tiny_corpus.valid) == tiny_config.corpus.n_valid
        assert len(tiny_corpus.test) == tiny_config.corpus.n_test
        sentences = [p.tokens for split in tiny_corpus.splits.values() for p in split]
        assert len(sentences) == len(set(sentences))

    def test_sentence_lengths_and_tokens(self, tiny_config, tiny_corpus):
        """测试句长范围与内容 token"""
        for pair in tiny_corpus.train:
            assert (
                tiny_config.corpus.min_len
                <= len(pair.tokens)
                <= tiny_config.corpus.max_len
            )
            assert all(t in tiny_corpus.vocab.content_ids for t in pair.tokens)

    def test_rerender_from_coordinates(self, tiny_corpus):
        """测试由 (speaker, render_seed) 重渲染得到相同帧"""
        pair = tiny_corpus.valid[1]
        frames = render_frames(
            pair.tokens, pair.speaker, tiny_corpus.acoustic, pair.render_seed
        )
        assert frames.tobytes() == pair.frames.tobytes()

    def test_exclude(self, tiny_config, tiny_corpus):
        """测试排除集合中的句子不会被采样"""
        excluded = tiny_corpus.sentences()
        other = gen_corpus(
            tiny_config.seed, tiny_config.corpus, tiny_config.acoustic, exclude=excluded
        )
        assert not (other.sentences() & excluded)

    def test_save_and_load(self, tiny_corpus, tmp_path):
        """测试落盘后加载逐位一致"""
        save_corpus(tiny_corpus, tmp_path / "corpus")
        loaded = load_corpus(tmp_path / "corpus")
        assert loaded.seed == tiny_corpus.seed
        for split in ("train", "valid", "test"):
            assert len(loaded.splits[split]) == len(tiny_corpus.splits[split])
            for a, b in zip(loaded.splits[split], tiny_corpus.splits[split]):
                assert (a.id, a.tokens, a.speaker, a.render_seed) == (
                    b.id,
                    b.tokens,
                    b.speaker,
                    b.render_seed,
                )
                assert a.frames.tobytes() == b.frames.tobytes()

    def test_load_missing_directory(self, tmp_path):
        """测试加载不存在的语料"""
        with pytest.raises(DataGenerationError, match="no corpus.toml"):
            load_corpus(tmp_path)

    def test_eval_suite(self, tiny_corpus):
        """测试评估套件：other 与 clean 句子相同，shifted 与训练语料不重叠"""
        suite = gen_eval_suite(tiny_corpus, seed=9)
        assert [p.tokens for p in suite["other"]] == [p.tokens for p in suite["clean"]]
        assert not ({p.tokens for p in suite["shifted"]} & tiny_corpus.sentences())
        assert [p.tokens for p in suite["far"]] == [p.tokens for p in suite["shifted"]]


@pytest.mark.unit
class TestZeroShot:
    """零样本数据集测试"""

    @pytest.mark.parametrize("kind", list(ZeroShotKind))
    def test_labels_and_truth(self, kind, tiny_config, tiny_corpus):
        """测试标签数与真值"""
        dataset = gen_zeroshot_dataset(
            kind,
            tiny_corpus.language,
            tiny_corpus.acoustic,
            4,
            tiny_config.zeroshot,
            tiny_config.corpus,
            exclude=tiny_corpus.sentences(),
        )
        n, k = tiny_config.zeroshot.n_classes, tiny_config.zeroshot.n_per_class
        assert dataset.n_classes == n
        assert len(set(dataset.labels)) == n
        assert len(dataset.items) == n * k
        assert dataset.truth == [i for i in range(n) for _ in range(k)]
        for item, truth in zip(dataset.items, dataset.truth):
            assert item.tokens == dataset.labels[truth]

    def test_digit_like_uses_interchangeable_class(self, tiny_config, tiny_corpus):
        """测试 digit-like 标签来自可互换类"""
        dataset = gen_zeroshot_dataset(
            ZeroShotKind.DIGIT_LIKE,
            tiny_corpus.language,
            tiny_corpus.acoustic,
            4,
            tiny_config.zeroshot,
        )
        assert all(label[0] in tiny_corpus.vocab.classes[0] for label in dataset.labels)

    def test_too_many_classes(self, tiny_corpus):
        """测试类别数超过可用 token"""
        with pytest.raises(DataGenerationError, match="interchangeable class"):
            gen_zeroshot_dataset(
                ZeroShotKind.DIGIT_LIKE,
                tiny_corpus.language,
                tiny_corpus.acoustic,
                4,
                ZeroShotConfig(n_classes=7),
            )


@pytest.mark.unit
class TestProbing:
    """探针任务测试"""

    @pytest.fixture(scope="class")
    def tasks(self, tiny_config, tiny_corpus):
        return gen_probing_tasks(
            13,
            tiny_config.probing,
            tiny_corpus.language,
            tiny_corpus.acoustic,
            tiny_config.corpus,
            tiny_config.acoustic,
            exclude=tiny_corpus.sentences(),
        )

    def test_all_tasks_generated(self, tasks):
        """测试五个任务都生成且划分大小正确"""
        assert set(tasks) == set(ProbingTask)
        for dataset in tasks.values():
            assert len(dataset.splits["train"]) == 12
            assert len(dataset.splits["test"]) == 6

    def test_labels_follow_rules(self, tasks, tiny_corpus, tiny_config):
        """测试标签与真值规则一致"""
        vocab = tiny_corpus.vocab
        lo, hi = tiny_config.corpus.min_len, tiny_config.corpus.max_len
        for task in (
            ProbingTask.LEN,
            ProbingTask.CONTENT,
            ProbingTask.MARKER,
            ProbingTask.PARITY,
        ):
            for split in tasks[task].splits.values():
                for example in split:
                    label = label_of(task, example.tokens, vocab, lo, hi)
                    assert label == example.label

    def test_shift_is_single_transposition(self, tasks):
        """测试 SHIFT 正例恰好交换一对相邻不同 token"""
        for example in tasks[ProbingTask.SHIFT].splits["train"]:
            diff = [
                i
                for i, (a, b) in enumerate(zip(example.tokens, example.source))
                if a != b
            ]
            if example.label == 0:
                assert diff == []
            else:
                assert len(diff) == 2 and diff[1] == diff[0] + 1
                i = diff[0]
                assert example.tokens[i] == example.source[i + 1]
                assert example.tokens[i + 1] == example.source[i]

    def test_sentences_unique_and_unseen(self, tasks, tiny_corpus):
        """测试任务内句子不重复且不出现在训练语料中"""
        corpus_sentences = tiny_corpus.sentences()
        for dataset in tasks.values():
            sentences = [e.tokens for split in dataset.splits.values() for e in split]
            assert len(sentences) == len(set(sentences))
            assert not (set(sentences) & corpus_sentences)

    def test_balanced_labels(self, tasks):
        """测试训练划分类别均衡"""
        labels = [e.label for e in tasks[ProbingTask.PARITY].splits["train"]]
        assert labels.count(0) == labels.count(1)

    def test_designated_tokens(self, tiny_corpus):
        """测试指定词与标记词"""
        vocab = tiny_corpus.vocab
        assert len(content_tokens(vocab)) == 2 * (vocab.n_classes - 1)
        markers = marker_tokens(vocab)
        assert markers == (vocab.classes[1][2], vocab.classes[1][3])
        assert not set(markers) & set(content_tokens(vocab))

    def test_length_bucket(self):
        """测试句长分桶"""
        assert length_bucket(3, 3, 8) == 0
        assert length_bucket(8, 3, 8) == 5
        with pytest.raises(DataGenerationError):
            length_bucket(9, 3, 8)
        with pytest.raises(DataGenerationError, match="cannot form"):
            length_bucket(3, 3, 6)

    def test_capacity_exceeded(self, tiny_corpus, tiny_config):
        """测试样本数超过任务容量"""
        with pytest.raises(DataGenerationError, match="combinatorial capacity"):
            gen_probing_tasks(
                13,
                ProbingSizes(n_train=600, n_valid=1, n_test=1),
                tiny_corpus.language,
                tiny_corpus.acoustic,
                tiny_config.corpus.model_copy(update={"min_len": 1, "max_len": 6}),
                tiny_config.acoustic,
                tasks=[ProbingTask.LEN],
            )
