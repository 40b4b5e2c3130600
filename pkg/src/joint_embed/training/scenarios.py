"""训练场景与标准实验矩阵"""

from typing import Dict, List, Optional

from pydantic import Field, model_validator

from ..core.optim import LossWeights, LrSchedule
from ..types.configs import AugmentConfig, JointConfig, StrictModel
from ..types.enums import StudentInit, Trainable


class TrainScenario(StrictModel):
    """实验矩阵中的一行"""
    scenario_id: str = Field(..., min_length=1)
    student_init: StudentInit = StudentInit.RANDOM
    trainable: Trainable = Trainable.ALL_STUDENT
    multitask: bool = False
    weights: LossWeights = LossWeights()
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=32, ge=1)
    schedule: LrSchedule = LrSchedule()
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    augment: AugmentConfig = AugmentConfig()
    seed: int = Field(default=0, ge=0)
    description: str = ""

    @model_validator(mode="after")
    def _check_consistent(self) -> "TrainScenario":
        if self.trainable == Trainable.PROJECTION_ONLY and self.multitask:
            raise ValueError("projection-only scenarios cannot be multitask")
        if not self.multitask and self.weights.gamma != 0.0:
            raise ValueError("gamma must be 0 without the multitask objective")
        if self.multitask and self.weights.gamma <= 0.0:
            raise ValueError("multitask scenarios need gamma > 0")
        return self

    def with_seed(self, seed: int) -> "TrainScenario":
        return self.model_copy(update={"seed": seed})


# 参照单元：不做任何优化步骤的学生编码器
REFERENCE_CELLS: Dict[str, StudentInit] = {
    "G": StudentInit.RANDOM,
    "H": StudentInit.PRETRAINED,
}


def standard_matrix(
    joint: Optional[JointConfig] = None, seed: int = 0
) -> List[TrainScenario]:
    """A–F 六个训练场景

    A 随机初始化；B ASR 预训练初始化；C 预训练且只更新投影头；
    D/E 随机初始化 + 多任务（β=1/10）；F 预训练 + 多任务（β=100）。
    """
    joint = joint or JointConfig()
    common = dict(
        epochs=joint.epochs,
        batch_size=joint.batch_size,
        schedule=joint.schedule,
        label_smoothing=joint.label_smoothing,
        augment=joint.augment,
        seed=seed,
    )
    return [
        TrainScenario(scenario_id="A", description="random init", **common),
        TrainScenario(
            scenario_id="B",
            student_init=StudentInit.PRETRAINED,
            description="ASR-pretrained init",
            **common,
        ),
        TrainScenario(
            scenario_id="C",
            student_init=StudentInit.PRETRAINED,
            trainable=Trainable.PROJECTION_ONLY,
            description="ASR-pretrained, projection head only",
            **common,
        ),
        TrainScenario(
            scenario_id="D",
            multitask=True,
            weights=LossWeights(gamma=1.0, beta=1.0),
            description="random init, multitask beta=1",
            **common,
        ),
        TrainScenario(
            scenario_id="E",
            multitask=True,
            weights=LossWeights(gamma=1.0, beta=10.0),
            description="random init, multitask beta=10",
            **common,
        ),
        TrainScenario(
            scenario_id="F",
            student_init=StudentInit.PRETRAINED,
            multitask=True,
            weights=LossWeights(gamma=1.0, beta=100.0),
            description="ASR-pretrained, multitask beta=100",
            **common,
        ),
    ]
