"""训练测试

共享训练循环、预训练、联合训练场景、实验矩阵与运行目录。
"""

import numpy as np
import pytest
from pydantic import ValidationError

from joint_embed.core import LossWeights, grad_check
from joint_embed.core import functional as F
from joint_embed.exceptions import (
    CheckpointError,
    ConfigurationError,
    MissingDecoderError,
    TrainingError,
)
from joint_embed.models import (
    embed_speech_states,
    init_bundle,
    save_checkpoint,
    speech_states,
)
from joint_embed.training import (
    RunDirectory,
    TrainScenario,
    augment_batch,
    best_epoch,
    build_scenario_bundle,
    epoch_batches,
    pretrain_asr,
    pretrain_teacher,
    run_matrix,
    standard_matrix,
    train_joint,
    trainable_groups,
    wer_vs_retrieval,
)
from joint_embed.training.pretrain import asr_cross_entropy
from joint_embed.types.configs import AugmentConfig, JointConfig
from joint_embed.types.enums import CellStatus, StudentInit, Trainable
from joint_embed.types.records import HistoryRow


def joint_scenario(config, scenario_id="T", **overrides):
    recipe = config.joint
    fields = dict(
        scenario_id=scenario_id,
        epochs=recipe.epochs,
        batch_size=recipe.batch_size,
        schedule=recipe.schedule,
        label_smoothing=recipe.label_smoothing,
        augment=recipe.augment,
        seed=7,
    )
    fields.update(overrides)
    return TrainScenario(**fields)


@pytest.mark.unit
class TestLoopHelpers:
    """训练循环辅助函数测试"""

    def test_epoch_batches_cover_every_item(self):
        """测试每轮的批次恰好覆盖全部样本"""
        batches = epoch_batches(10, 4, seed=1, epoch=1)
        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    def test_epoch_batches_deterministic(self):
        """测试批次顺序由种子和轮次决定"""
        a = epoch_batches(10, 4, seed=1, epoch=2)
        b = epoch_batches(10, 4, seed=1, epoch=2)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = epoch_batches(10, 4, seed=1, epoch=3)
        assert not all(np.array_equal(x, y) for x, y in zip(a, c))

    def test_best_epoch_ties_take_earliest(self):
        """测试验证损失并列时取最早的轮次"""
        history = [
            HistoryRow(1, 1, 1e-3, 0.0, 0.5, 0.5, "valid"),
            HistoryRow(2, 2, 1e-3, 0.0, 0.4, 0.4, "valid"),
            HistoryRow(3, 2, 1e-3, 0.0, 0.1, 0.1, "train"),
            HistoryRow(4, 3, 1e-3, 0.0, 0.4, 0.4, "valid"),
        ]
        assert best_epoch(history) == 2

    def test_best_epoch_without_validation(self):
        """测试没有验证行"""
        with pytest.raises(TrainingError):
            best_epoch([HistoryRow(1, 1, 1e-3, 0.0, 0.5, 0.5, "train")])

    def test_augment_disabled(self, rng):
        """测试关闭增强时原样返回"""
        frames = [rng.standard_normal((6, 4))]
        out = augment_batch(frames, AugmentConfig(spec_augment=False), seed=0, step=1)
        assert out[0] is frames[0]

    def test_augment_clamps_to_utterance(self, rng):
        """测试掩码上限截断到样本大小"""
        frames = [rng.standard_normal((2, 3)) + 5.0]
        out = augment_batch(
            frames, AugmentConfig(time_mask_max=10, channel_mask_max=10), seed=0, step=1
        )
        assert out[0].shape == (2, 3)
        assert np.all((out[0] == frames[0]) | (out[0] == 0.0))


@pytest.mark.unit
class TestScenarios:
    """训练场景测试"""

    def test_standard_matrix(self):
        """测试 A–F 六个场景"""
        scenarios = {
            s.scenario_id: s for s in standard_matrix(JointConfig(epochs=3), seed=2)
        }
        assert sorted(scenarios) == ["A", "B", "C", "D", "E", "F"]
        assert scenarios["C"].trainable == Trainable.PROJECTION_ONLY
        assert scenarios["E"].weights.beta == 10.0
        assert scenarios["F"].student_init == StudentInit.PRETRAINED
        assert all(s.epochs == 3 and s.seed == 2 for s in scenarios.values())

    def test_trainable_groups(self):
        """测试各场景的可训练参数组"""
        scenarios = {s.scenario_id: s for s in standard_matrix()}
        assert trainable_groups(scenarios["A"]) == ["student", "projection"]
        assert trainable_groups(scenarios["C"]) == ["projection"]
        assert trainable_groups(scenarios["D"]) == ["student", "projection", "decoder"]

    def test_projection_only_multitask_rejected(self):
        """测试只训练投影头的场景不能是多任务"""
        with pytest.raises(ValidationError, match="projection-only"):
            TrainScenario(
                scenario_id="X",
                trainable=Trainable.PROJECTION_ONLY,
                multitask=True,
                weights=LossWeights(gamma=1.0, beta=1.0),
            )

    def test_gamma_requires_multitask(self):
        """测试非多任务场景的 γ 必须为零"""
        with pytest.raises(ValidationError, match="gamma"):
            TrainScenario(scenario_id="X", weights=LossWeights(gamma=1.0, beta=1.0))

    def test_with_seed(self):
        """测试替换种子"""
        scenario = TrainScenario(scenario_id="X").with_seed(9)
        assert scenario.seed == 9

    def test_pretrained_needs_asr_checkpoint(self, tiny_config, tmp_path):
        """测试预训练初始化的场景缺少 ASR 检查点"""
        scenario = joint_scenario(tiny_config, student_init=StudentInit.PRETRAINED)
        with pytest.raises(ConfigurationError, match="needs an ASR checkpoint"):
            build_scenario_bundle(scenario, tiny_config, tmp_path / "teacher.ckpt")


@pytest.mark.unit
class TestRunDirectory:
    """运行目录测试"""

    def test_history_round_trip(self, tmp_path):
        """测试损失历史写出后读回"""
        run_dir = RunDirectory(tmp_path, "A", 0)
        rows = [
            HistoryRow(1, 1, 0.1, 0.0, 0.25, 0.25, "train"),
            HistoryRow(1, 1, 0.1, 0.0, 0.125, 0.125, "valid"),
        ]
        run_dir.write_history(rows)
        back = run_dir.read_history()
        assert [row["split"] for row in back] == ["train", "valid"]
        assert back[1]["l2"] == 0.125
        assert back[0]["lr"] == 0.1

    def test_summary_round_trip(self, tmp_path):
        """测试摘要写出后读回"""
        run_dir = RunDirectory(tmp_path, "B", 3)
        run_dir.write_summary({"best_epoch": 2, "valid_l2": 0.5})
        assert run_dir.read_summary() == {"best_epoch": 2, "valid_l2": 0.5}
        assert run_dir.path == tmp_path / "B" / "3"

    def test_missing_files(self, tmp_path):
        """测试读取不存在的历史"""
        with pytest.raises(CheckpointError, match="no history"):
            RunDirectory(tmp_path, "A", 0).read_history()

    def test_config_includes_scenario(self, tmp_path, tiny_config):
        """测试配置文本带场景表"""
        run_dir = RunDirectory(tmp_path, "A", 0)
        path = run_dir.write_config(tiny_config, joint_scenario(tiny_config, "A"))
        assert "[scenario]" in path.read_text(encoding="utf-8")


@pytest.mark.integration
class TestJointTraining:
    """联合训练测试"""

    def test_teacher_stays_frozen(self, tiny_config, tiny_corpus, tiny_bundle):
        """测试联合训练不改变教师参数"""
        teacher = tiny_bundle.digest("teacher")
        student = tiny_bundle.digest("student")
        result = train_joint(joint_scenario(tiny_config), tiny_corpus, tiny_bundle)
        assert tiny_bundle.digest("teacher") == teacher
        assert tiny_bundle.digest("student") != student
        valid_rows = [row for row in result.history if row.split == "valid"]
        assert len(valid_rows) == tiny_config.joint.epochs
        assert result.valid_wer is None
        assert 1 <= result.best.epoch <= tiny_config.joint.epochs

    def test_projection_only_keeps_student(self, tiny_config, tiny_corpus, tiny_bundle):
        """测试只训练投影头时学生参数逐位不变"""
        student = tiny_bundle.digest("student")
        projection = tiny_bundle.digest("projection")
        train_joint(
            joint_scenario(tiny_config, trainable=Trainable.PROJECTION_ONLY),
            tiny_corpus,
            tiny_bundle,
        )
        assert tiny_bundle.digest("student") == student
        assert tiny_bundle.digest("projection") != projection

    def test_multitask_requires_decoder(self, tiny_config, tiny_corpus):
        """测试多任务场景缺少解码器"""
        bundle = init_bundle(tiny_config.bundle.model_copy(update={"decoder": None}), 0)
        scenario = joint_scenario(
            tiny_config, multitask=True, weights=LossWeights(gamma=1.0, beta=1.0)
        )
        with pytest.raises(MissingDecoderError):
            train_joint(scenario, tiny_corpus, bundle)

    def test_multitask_reports_wer(self, tiny_config, tiny_corpus, tiny_bundle):
        """测试多任务训练附带验证集 WER 与损失比"""
        scenario = joint_scenario(
            tiny_config, multitask=True, weights=LossWeights(gamma=1.0, beta=1.0)
        )
        result = train_joint(scenario, tiny_corpus, tiny_bundle)
        assert result.valid_wer is not None and result.valid_wer >= 0.0
        assert result.ce_l2_ratio is not None and result.ce_l2_ratio > 0.0

    @pytest.mark.slow
    def test_zero_beta_multitask_matches_asr_pretraining(
        self, tiny_config, tiny_corpus
    ):
        """测试 β=0 的多任务训练与纯 ASR 训练逐步一致"""
        recipe = tiny_config.asr_pretrain
        asr_bundle = init_bundle(tiny_config.bundle, 7)
        joint_bundle = asr_bundle.clone()
        pretrain_asr(tiny_corpus, tiny_config, 7, bundle=asr_bundle)
        scenario = TrainScenario(
            scenario_id="beta0",
            multitask=True,
            weights=LossWeights(gamma=1.0, beta=0.0),
            epochs=recipe.epochs,
            batch_size=recipe.batch_size,
            schedule=recipe.schedule,
            label_smoothing=recipe.label_smoothing,
            augment=recipe.augment,
            seed=7,
        )
        train_joint(scenario, tiny_corpus, joint_bundle)
        for group in ("student", "decoder"):
            for name, value in asr_bundle.state_dict([group]).items():
                np.testing.assert_array_equal(
                    joint_bundle.state_dict([group])[name], value
                )


@pytest.mark.slow
class TestJointLossGradient:
    """联合损失端到端梯度校验测试"""

    @pytest.mark.parametrize("seed", range(20))
    def test_multitask_loss_matches_finite_differences(self, tiny_config, seed):
        """测试 γ·CE + β·L2 对学生、投影头、解码器偏置与增益的梯度"""
        rng = np.random.default_rng(500 + seed)
        bundle = init_bundle(tiny_config.bundle, seed)
        frames = [rng.standard_normal((9, 8)), rng.standard_normal((6, 8))]
        targets = rng.standard_normal((2, 8))
        targets /= np.linalg.norm(targets, axis=1, keepdims=True)
        seqs = [
            [int(t) for t in rng.integers(4, 24, size=3)],
            [int(t) for t in rng.integers(4, 24, size=2)],
        ]
        weights = LossWeights(gamma=1.0, beta=1.0)

        def fn():
            states, mask = speech_states(bundle, frames)
            ce = asr_cross_entropy(bundle, states, mask, seqs, 0.1)
            l2 = F.l2_pair_loss(embed_speech_states(bundle, states, mask), targets)
            return F.total_loss(ce, l2, weights)

        leaves = [
            param
            for name, param in bundle.named_parameters()
            if not name.startswith("teacher.") and param.data.ndim == 1
        ]
        result = grad_check(fn, leaves)
        assert result.per_tensor["decoder.layers.0.cross_attn.k_proj.bias"] < 1e-6
        assert "projection.norm.gain" in result.per_tensor
        assert "student.convs.0.bias" in result.per_tensor
        assert result.passed(1e-4), result.per_tensor


@pytest.mark.integration
class TestWerTrend:
    """WER 与检索准确率趋势测试"""

    def test_identical_snapshots_give_identical_rows(
        self, tiny_config, tiny_corpus, tiny_bundle
    ):
        """测试两个相同的 ASR 快照得到相同的行，且相关系数无定义"""
        snapshot = tiny_bundle.state_dict(["student", "decoder"])
        table = wer_vs_retrieval(
            [(10, snapshot), (20, snapshot)],
            tiny_corpus,
            tiny_config,
            tiny_bundle.state_dict(["teacher"]),
            joint_scenario(tiny_config, "trend"),
            eval_pairs=tiny_corpus.test[:4],
        )
        first, second = table.rows
        assert (first.checkpoint_step, second.checkpoint_step) == (10, 20)
        assert first.wer == second.wer
        assert first.acc_t2s == second.acc_t2s
        assert first.acc_s2t == second.acc_s2t
        assert table.spearman is None


@pytest.mark.integration
class TestPretraining:
    """预训练测试"""

    def test_teacher_pretraining_is_deterministic(self, tiny_config, tiny_corpus):
        """测试教师预训练对相同种子逐位可复现"""
        first = pretrain_teacher(tiny_corpus, tiny_config, 3)
        second = pretrain_teacher(tiny_corpus, tiny_config, 3)
        assert first.bundle.digest("teacher") == second.bundle.digest("teacher")
        assert 0.0 <= first.masked_accuracy <= 1.0
        assert first.bundle.digest("student") == second.bundle.digest("student")

    def test_asr_pretraining_updates_only_asr_groups(
        self, tiny_config, tiny_corpus, tiny_bundle
    ):
        """测试 ASR 预训练只更新学生与解码器"""
        teacher = tiny_bundle.digest("teacher")
        projection = tiny_bundle.digest("projection")
        result = pretrain_asr(
            tiny_corpus, tiny_config, 5, bundle=tiny_bundle, snapshot_steps=[1]
        )
        assert tiny_bundle.digest("teacher") == teacher
        assert tiny_bundle.digest("projection") == projection
        assert result.result.valid_wer is not None
        assert sorted(result.result.snapshots) == [1]


@pytest.mark.integration
class TestMatrix:
    """实验矩阵测试"""

    def test_failed_cells_are_isolated(
        self, tiny_config, tiny_corpus, tiny_bundle, tmp_path
    ):
        """测试缺少 ASR 检查点时只有相关单元失败"""
        teacher_path = tmp_path / "teacher.ckpt"
        save_checkpoint(
            teacher_path, tiny_config.bundle, tiny_bundle.state_dict(["teacher"])
        )
        scenarios = [
            joint_scenario(tiny_config, "A", epochs=1),
            joint_scenario(
                tiny_config, "B", epochs=1, student_init=StudentInit.PRETRAINED
            ),
        ]
        run = run_matrix(
            tiny_config,
            tiny_corpus,
            [0],
            teacher_path,
            None,
            tmp_path / "runs",
            scenarios,
        )
        assert run.cell("A", 0).status == CellStatus.OK
        assert run.cell("B", 0).status == CellStatus.FAILED
        assert run.cell("G", 0).status == CellStatus.REFERENCE
        assert run.cell("H", 0).status == CellStatus.FAILED
        assert run.errors["total_errors"] == 2
        cell_dir = tmp_path / "runs" / "A" / "0"
        for name in (
            "config",
            "history.csv",
            "best.ckpt",
            "final.ckpt",
            "summary.json",
        ):
            assert (cell_dir / name).exists()

    def test_duplicate_scenario_ids(self, tiny_config, tiny_corpus, tmp_path):
        """测试场景编号重复"""
        scenarios = [joint_scenario(tiny_config, "A"), joint_scenario(tiny_config, "A")]
        with pytest.raises(ConfigurationError, match="distinct"):
            run_matrix(
                tiny_config, tiny_corpus, [0], tmp_path / "t.ckpt", scenarios=scenarios
            )

    def test_reference_id_collision(self, tiny_config, tiny_corpus, tmp_path):
        """测试场景编号与参照单元冲突"""
        with pytest.raises(ConfigurationError, match="reference cells"):
            run_matrix(
                tiny_config,
                tiny_corpus,
                [0],
                tmp_path / "t.ckpt",
                scenarios=[joint_scenario(tiny_config, "G")],
            )
