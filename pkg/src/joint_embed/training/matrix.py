"""实验矩阵

对每个种子运行 A–F 训练场景，并落盘 G/H 两个未训练的参照模型组。
单元之间没有共享的可变状态，可以在多个进程中并行；某个单元失败只标记该单元。
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from ..config import ExperimentConfig, config_hash
from ..datagen.corpus import Corpus
from ..exceptions import ConfigurationError, ErrorHandler, create_error_context
from ..logger import get_logger
from ..types.enums import CellStatus, StudentInit
from ..types.reports import MatrixCell
from .joint import build_scenario_bundle, train_joint
from .rundir import RunDirectory
from .scenarios import REFERENCE_CELLS, TrainScenario, standard_matrix

logger = get_logger(__name__)

PathLike = Union[str, Path]


@dataclass
class MatrixRun:
    cells: List[MatrixCell]
    errors: Dict[str, Any] = field(default_factory=dict)

    def cell(self, scenario_id: str, seed: int) -> MatrixCell:
        for cell in self.cells:
            if cell.scenario_id == scenario_id and cell.seed == seed:
                return cell
        raise KeyError((scenario_id, seed))

    @property
    def failed(self) -> List[MatrixCell]:
        return [cell for cell in self.cells if cell.status == CellStatus.FAILED]


def run_cell(
    scenario: TrainScenario,
    corpus: Corpus,
    config: ExperimentConfig,
    teacher_path: PathLike,
    asr_path: Optional[PathLike],
    runs_dir: PathLike,
) -> MatrixCell:
    """训练一个 (场景, 种子) 单元并写出运行目录"""
    run_dir = RunDirectory(runs_dir, scenario.scenario_id, scenario.seed)
    bundle = build_scenario_bundle(scenario, config, teacher_path, asr_path)
    result = train_joint(scenario, corpus, bundle)
    run_dir.write_config(config, scenario)
    run_dir.write_history(result.history)
    hashes = run_dir.save_checkpoints(
        config.bundle, result.best.state, result.final.state
    )
    cell = MatrixCell(
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        status=CellStatus.OK,
        best_epoch=result.best.epoch,
        valid_l2=result.best.valid.l2,
        valid_total=result.best.valid.total,
        ce_l2_ratio=result.ce_l2_ratio,
        valid_wer=result.valid_wer,
        run_dir=str(run_dir.path),
    )
    run_dir.write_summary(
        {
            **cell.model_dump(mode="json"),
            "config_hash": config_hash(config),
            "checkpoint_hashes": hashes,
            "initial_valid": vars(result.initial_valid),
        }
    )
    return cell


def reference_cell(
    cell_id: str,
    student_init: StudentInit,
    seed: int,
    config: ExperimentConfig,
    teacher_path: PathLike,
    asr_path: Optional[PathLike],
    runs_dir: PathLike,
) -> MatrixCell:
    """未经联合训练的参照模型组：只初始化、不做任何优化步骤"""
    scenario = TrainScenario(
        scenario_id=cell_id,
        student_init=student_init,
        seed=seed,
        description="reference",
    )
    bundle = build_scenario_bundle(scenario, config, teacher_path, asr_path)
    run_dir = RunDirectory(runs_dir, cell_id, seed)
    run_dir.write_config(config, scenario)
    state = bundle.state_dict()
    hashes = run_dir.save_checkpoints(config.bundle, state, state)
    cell = MatrixCell(
        scenario_id=cell_id,
        seed=seed,
        status=CellStatus.REFERENCE,
        run_dir=str(run_dir.path),
    )
    run_dir.write_summary(
        {
            **cell.model_dump(mode="json"),
            "config_hash": config_hash(config),
            "checkpoint_hashes": hashes,
        }
    )
    return cell


def run_matrix(
    config: ExperimentConfig,
    corpus: Corpus,
    seeds: Sequence[int],
    teacher_path: PathLike,
    asr_path: Optional[PathLike] = None,
    runs_dir: PathLike = "runs",
    scenarios: Optional[Sequence[TrainScenario]] = None,
    include_references: bool = True,
    workers: int = 1,
) -> MatrixRun:
    """运行实验矩阵

    Args:
        config: 实验配置
        corpus: 配对语料
        seeds: 种子集合
        teacher_path: 预训练教师检查点
        asr_path: ASR 预训练检查点（pretrained 场景与 H 需要）
        runs_dir: 运行目录根
        scenarios: 训练场景，默认 A–F
        include_references: 是否落盘 G/H 参照
        workers: 并行进程数，1 表示串行

    Returns:
        MatrixRun: 每个 (场景, 种子) 的单元与错误摘要
    """
    scenarios = (
        list(scenarios) if scenarios is not None else standard_matrix(config.joint)
    )
    ids = [s.scenario_id for s in scenarios]
    if len(ids) != len(set(ids)):
        raise ConfigurationError(
            f"scenario ids must be distinct, got {ids}", config_key="scenarios"
        )
    if include_references and set(ids) & set(REFERENCE_CELLS):
        raise ConfigurationError(
            "scenario ids collide with reference cells G/H", config_key="scenarios"
        )

    handler = ErrorHandler()
    jobs = [scenario.with_seed(seed) for seed in seeds for scenario in scenarios]
    logger.info(
        f"matrix: {len(scenarios)} scenarios x {len(seeds)} seeds, {workers} worker(s)"
    )

    def failed(scenario_id: str, seed: int, exc: Exception) -> MatrixCell:
        context = create_error_context(
            "run_matrix", "training", scenario=scenario_id, seed=seed
        )
        error = handler.handle_error(exc, context)
        logger.error(f"cell {scenario_id}/{seed} failed: {error}")
        return MatrixCell(
            scenario_id=scenario_id,
            seed=seed,
            status=CellStatus.FAILED,
            error=str(error),
        )

    cells: List[MatrixCell] = []
    if workers <= 1:
        for job in jobs:
            try:
                cells.append(
                    run_cell(job, corpus, config, teacher_path, asr_path, runs_dir)
                )
            except Exception as exc:
                cells.append(failed(job.scenario_id, job.seed, exc))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                (
                    job,
                    pool.submit(
                        run_cell, job, corpus, config, teacher_path, asr_path, runs_dir
                    ),
                )
                for job in jobs
            ]
            for job, future in futures:
                try:
                    cells.append(future.result())
                except Exception as exc:
                    cells.append(failed(job.scenario_id, job.seed, exc))

    if include_references:
        for seed in seeds:
            for cell_id, student_init in REFERENCE_CELLS.items():
                try:
                    cell = reference_cell(
                        cell_id,
                        student_init,
                        seed,
                        config,
                        teacher_path,
                        asr_path,
                        runs_dir,
                    )
                    cells.append(cell)
                except Exception as exc:
                    cells.append(failed(cell_id, seed, exc))

    run = MatrixRun(cells=cells, errors=handler.get_error_summary())
    logger.info(
        f"matrix finished: {len(cells) - len(run.failed)} ok, {len(run.failed)} failed"
    )
    return run
