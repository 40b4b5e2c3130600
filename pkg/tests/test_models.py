"""模型测试

测试两条编码管线、模型组初始化与参数组、解码器因果性与贪心解码。
"""

import numpy as np
import pytest

from joint_embed.core import (
    Adam,
    Tensor,
    backward,
    current_tape,
    eval_mode,
    inference_mode,
)
from joint_embed.datagen import BOS_ID, EOS_ID
from joint_embed.exceptions import (
    CheckpointError,
    ConfigurationError,
    MissingDecoderError,
    ShapeError,
)
from joint_embed.models import (
    GROUPS,
    decode_asr_step,
    encode_speech,
    encode_speech_batch,
    encode_text,
    encode_text_batch,
    greedy_decode,
    init_bundle,
    save_checkpoint,
)
from joint_embed.core import functional as F
from joint_embed.training.pretrain import asr_cross_entropy
from joint_embed.models.bundle import speech_states
from joint_embed.types.enums import InitMode


@pytest.mark.unit
class TestTextPipeline:
    """文本管线测试"""

    def test_deterministic_in_eval_mode(self, tiny_bundle):
        """测试同一句子两次编码一致"""
        tokens = (5, 9, 13, 7)
        np.testing.assert_array_equal(
            encode_text(tokens, tiny_bundle), encode_text(tokens, tiny_bundle)
        )

    def test_unit_norm(self, tiny_bundle, tiny_config):
        """测试输出为单位向量"""
        emb = encode_text((5, 9, 13), tiny_bundle)
        assert emb.shape == (tiny_config.text.dim_t,)
        assert abs(np.linalg.norm(emb) - 1.0) < 1e-9

    def test_token_order_matters(self, tiny_bundle):
        """测试交换两个 token 改变嵌入"""
        a = encode_text((5, 9, 13, 7), tiny_bundle)
        b = encode_text((9, 5, 13, 7), tiny_bundle)
        assert np.linalg.norm(a - b) > 1e-6

    def test_padding_does_not_change_embedding(self, tiny_bundle):
        """测试批内填充不影响结果"""
        single = encode_text((5, 9, 13), tiny_bundle)
        with inference_mode():
            seqs = [(5, 9, 13), (4, 6, 8, 10, 12, 14)]
            batch = encode_text_batch(tiny_bundle, seqs).data
        np.testing.assert_allclose(batch[0], single, atol=1e-12)

    def test_overlength_sequence(self, tiny_bundle, tiny_config):
        """测试超长序列报出上限"""
        tokens = tuple([5] * (tiny_config.text.max_len + 1))
        with pytest.raises(ShapeError, match=str(tiny_config.text.max_len)):
            encode_text(tokens, tiny_bundle)


@pytest.mark.unit
class TestSpeechPipeline:
    """语音管线测试"""

    def test_output_dim_and_norm(self, tiny_bundle, tiny_config, rng):
        """测试输出维度等于 dim_t 且为单位向量"""
        emb = encode_speech(
            rng.standard_normal((10, tiny_config.speech.frame_dim)), tiny_bundle
        )
        assert emb.shape == (tiny_config.text.dim_t,)
        assert abs(np.linalg.norm(emb) - 1.0) < 1e-9

    def test_doubling_length_follows_stride_arithmetic(
        self, tiny_bundle, tiny_config, rng
    ):
        """测试有效长度按步长算术变化"""
        frames = rng.standard_normal((9, tiny_config.speech.frame_dim))
        doubled = np.concatenate([frames, frames])
        with inference_mode():
            _, mask = speech_states(tiny_bundle, [frames, doubled])
        lengths = mask.sum(axis=1)
        expected = tiny_bundle.student.output_lengths(np.array([9, 18]))
        np.testing.assert_array_equal(lengths, expected)
        assert abs(np.linalg.norm(encode_speech(doubled, tiny_bundle)) - 1.0) < 1e-9

    def test_too_short_input(self, tiny_bundle, tiny_config):
        """测试短于感受野的输入"""
        with pytest.raises(ShapeError, match="input shorter than receptive field"):
            encode_speech(np.ones((1, tiny_config.speech.frame_dim)), tiny_bundle)

    def test_batch_matches_single(self, tiny_bundle, tiny_config, rng):
        """测试批编码与逐条编码一致"""
        frames = [
            rng.standard_normal((n, tiny_config.speech.frame_dim)) for n in (7, 12)
        ]
        with inference_mode():
            batch = encode_speech_batch(tiny_bundle, frames).data
        for row, f in enumerate(frames):
            np.testing.assert_allclose(
                batch[row], encode_speech(f, tiny_bundle), atol=1e-12
            )

    def test_frozen_teacher_gets_no_gradient(self, tiny_bundle, tiny_corpus):
        """测试联合目标反向后教师梯度为零"""
        tiny_bundle.freeze("teacher")
        pairs = tiny_corpus.train[:3]
        target = encode_text_batch(tiny_bundle, [p.tokens for p in pairs])
        speech = encode_speech_batch(tiny_bundle, [p.frames for p in pairs])
        backward(F.l2_pair_loss(speech, target))
        teacher_grad = sum(
            float(np.abs(p.grad).sum())
            for p in tiny_bundle.parameters(["teacher"])
            if p.grad is not None
        )
        assert teacher_grad == 0.0
        assert any(p.grad is not None for p in tiny_bundle.parameters(["student"]))


@pytest.mark.unit
class TestBundle:
    """模型组测试"""

    def test_same_seed_bit_identical(self, tiny_bundle_config):
        """测试相同种子逐位一致"""
        a, b = init_bundle(tiny_bundle_config, 9), init_bundle(tiny_bundle_config, 9)
        for name, value in a.state_dict().items():
            np.testing.assert_array_equal(value, b.state_dict()[name])

    def test_parameter_names_prefixed_by_group(self, tiny_bundle):
        """测试参数名带组前缀"""
        for group in GROUPS:
            for name, _ in tiny_bundle.named_parameters(group):
                assert name.startswith(group + ".")

    def test_groups_use_independent_streams(self, tiny_bundle_config):
        """测试不同种子得到不同参数"""
        a, b = init_bundle(tiny_bundle_config, 1), init_bundle(tiny_bundle_config, 2)
        assert a.digest("teacher") != b.digest("teacher")
        assert a.digest("student") != b.digest("student")

    def test_checkpoint_round_trip_bit_exact(
        self, tiny_bundle, tiny_bundle_config, tmp_path
    ):
        """测试保存后载入逐位一致"""
        path = tmp_path / "bundle.ckpt"
        save_checkpoint(path, tiny_bundle_config, tiny_bundle.state_dict())
        loaded = init_bundle(
            tiny_bundle_config, 77, InitMode.FROM_CHECKPOINT, checkpoint_path=path
        )
        for group in GROUPS:
            assert loaded.digest(group) == tiny_bundle.digest(group)

    def test_teacher_pretrained_requires_path(self, tiny_bundle_config):
        """测试 teacher_pretrained 模式缺少教师检查点"""
        with pytest.raises(ConfigurationError):
            init_bundle(tiny_bundle_config, 0, InitMode.TEACHER_PRETRAINED)

    def test_teacher_pretrained_loads_only_teacher(
        self, tiny_bundle, tiny_bundle_config, tmp_path
    ):
        """测试只载入教师组，其余组随机初始化"""
        path = tmp_path / "teacher.ckpt"
        save_checkpoint(path, tiny_bundle_config, tiny_bundle.state_dict(["teacher"]))
        loaded = init_bundle(
            tiny_bundle_config, 31, InitMode.TEACHER_PRETRAINED, teacher_path=path
        )
        fresh = init_bundle(tiny_bundle_config, 31)
        assert loaded.digest("teacher") == tiny_bundle.digest("teacher")
        assert loaded.digest("student") == fresh.digest("student")

    def test_shape_mismatch_names_parameter(self, tiny_bundle):
        """测试形状不符报出第一个参数"""
        state = tiny_bundle.state_dict(["projection"])
        name = sorted(state)[0]
        state[name] = np.zeros(state[name].shape + (2,))
        with pytest.raises(CheckpointError, match="shape mismatch"):
            tiny_bundle.load_state_dict(state)

    def test_missing_parameter_in_group(self, tiny_bundle):
        """测试组内参数缺失"""
        state = tiny_bundle.state_dict(["projection"])
        state.pop(sorted(state)[0])
        with pytest.raises(CheckpointError, match="missing parameter"):
            tiny_bundle.load_state_dict(state)

    def test_freeze_and_unfreeze(self, tiny_bundle):
        """测试按组冻结"""
        tiny_bundle.freeze("teacher")
        assert tiny_bundle.frozen["teacher"]
        assert all(p.frozen for p in tiny_bundle.parameters(["teacher"]))
        tiny_bundle.unfreeze("teacher")
        assert not any(p.frozen for p in tiny_bundle.parameters(["teacher"]))


@pytest.mark.unit
class TestDecoder:
    """解码器测试"""

    def test_missing_decoder(self, tiny_config, rng):
        """测试无解码器的模型组"""
        config = tiny_config.bundle.model_copy(update={"decoder": None})
        bundle = init_bundle(config, 0)
        with pytest.raises(MissingDecoderError, match="scenario lacks decoder"):
            decode_asr_step(
                rng.standard_normal((4, tiny_config.speech.dim_s)), [BOS_ID], bundle
            )

    def test_bos_prefix_gives_vocab_logits(self, tiny_bundle, tiny_config, rng):
        """测试以 bos 开头的前缀"""
        logits = decode_asr_step(
            rng.standard_normal((4, tiny_config.speech.dim_s)), [BOS_ID], tiny_bundle
        )
        assert logits.shape == (tiny_config.text.vocab_size,)
        assert np.all(np.isfinite(logits))

    def test_causality(self, tiny_bundle, tiny_config, rng):
        """测试后缀变化不影响前面位置的 logits"""
        memory = np.array([rng.standard_normal((5, tiny_config.speech.dim_s))])
        mask = np.ones((1, 5), dtype=bool)
        with inference_mode():
            prefix_a = np.array([[BOS_ID, 5, 6, 7]])
            prefix_b = np.array([[BOS_ID, 5, 11, 12]])
            a = tiny_bundle.decoder(prefix_a, Tensor(memory), mask).data
            b = tiny_bundle.decoder(prefix_b, Tensor(memory), mask).data
        np.testing.assert_allclose(a[0, :2], b[0, :2], atol=1e-12)
        assert not np.allclose(a[0, 2], b[0, 2])

    def test_greedy_decode_respects_limit(self, tiny_bundle, tiny_corpus):
        """测试贪心解码步数上限"""
        frames = tiny_corpus.train[0].frames
        tokens, terminated = greedy_decode(tiny_bundle, frames, max_steps=3)
        assert len(tokens) <= 3
        assert isinstance(terminated, bool)

    @pytest.mark.slow
    def test_overfit_pair_decodes_exactly(self, tiny_bundle, tiny_corpus):
        """测试过拟合单个样本后贪心解码复现转写"""
        pair = tiny_corpus.train[0]
        groups = ["student", "decoder"]
        for group in tiny_bundle.modules():
            if group in groups:
                tiny_bundle.unfreeze(group)
            else:
                tiny_bundle.freeze(group)
        optimizer = Adam(tiny_bundle.parameters(groups))
        with eval_mode(True):
            for _ in range(300):
                current_tape().clear()
                states, mask = speech_states(tiny_bundle, [pair.frames])
                loss = asr_cross_entropy(tiny_bundle, states, mask, [pair.tokens], 0.0)
                optimizer.zero_grad()
                backward(loss)
                optimizer.step(1e-2)
        tokens, terminated = greedy_decode(tiny_bundle, pair.frames)
        assert terminated
        assert tokens == pair.tokens
        assert EOS_ID not in tokens
