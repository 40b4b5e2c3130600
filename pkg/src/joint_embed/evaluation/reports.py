"""报告输出

每份报告是一个带单行表头的 CSV，旁边放同名 .json 摘要
（配置哈希、种子、检查点内容哈希与汇总指标）。
"""

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from ..exceptions import EvaluationError
from ..logger import get_logger
from ..types.reports import OrderingCheck, ReportSummary, RetrievalReport

logger = get_logger(__name__)

PathLike = Union[str, Path]

TRAINED_SCENARIOS = ("A", "B", "C", "D", "E", "F")
REFERENCE_SCENARIOS = ("G", "H")
CASCADE_SCENARIO = "I"
CHANCE_FACTOR = 3.0


def report_row(model: BaseModel, **extra: Any) -> Dict[str, Any]:
    """pydantic 报告 → 扁平 CSV 行（嵌套字段写成 JSON 文本）"""
    row = {}
    for key, value in {**model.model_dump(mode="json"), **extra}.items():
        row[key] = json.dumps(value) if isinstance(value, (list, dict)) else value
    return row


def write_csv(
    path: PathLike,
    rows: Sequence[Mapping[str, Any]],
    fieldnames: Optional[Sequence[str]] = None,
) -> Path:
    path = Path(path)
    if not rows and fieldnames is None:
        raise EvaluationError(f"no rows for {path}", instrument="reports")
    fieldnames = list(fieldnames) if fieldnames is not None else list(rows[0].keys())
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_report(
    path: PathLike, rows: Sequence[Mapping[str, Any]], summary: ReportSummary
) -> Tuple[Path, Path]:
    """写出 CSV 与 JSON 摘要"""
    csv_path = write_csv(path, rows)
    json_path = sidecar_path(csv_path)
    json_path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"report {summary.kind}: {len(rows)} rows -> {csv_path}")
    return csv_path, json_path


def load_summary(path: PathLike) -> ReportSummary:
    return ReportSummary.model_validate_json(
        sidecar_path(path).read_text(encoding="utf-8")
    )


# ---------------------------------------------------------------------------
# 实验矩阵汇总
# ---------------------------------------------------------------------------

@dataclass
class MatrixSummary:
    """每个场景的种子均值与排序性质检查"""
    means: Dict[str, Dict[str, float]] = field(default_factory=dict)
    checks: List[OrderingCheck] = field(default_factory=list)
    pool_size: int = 0

    def rows(self) -> List[Dict[str, Any]]:
        return [check.model_dump() for check in self.checks]

    def mean_rows(self) -> List[Dict[str, Any]]:
        return [
            {"scenario_id": sid, **values} for sid, values in sorted(self.means.items())
        ]


def summarize_matrix(
    results: Iterable[Tuple[str, int, RetrievalReport]],
) -> MatrixSummary:
    """由每个 (场景, 种子) 的检索报告计算种子均值，并检查排序性质

    检查项：G/H 接近随机（≤ 3/n）、A < B、B ≤ F、级联 I ≥ 每个端到端场景、D < E，
    以及每个训练场景的 T→S ≥ S→T。缺少相关场景的检查跳过。
    """
    grouped: Dict[str, List[RetrievalReport]] = defaultdict(list)
    for scenario_id, _, report in results:
        grouped[scenario_id].append(report)
    if not grouped:
        raise EvaluationError(
            "no matrix results to summarize", instrument="summarize_matrix"
        )

    summary = MatrixSummary(
        pool_size=max(r.n for reports in grouped.values() for r in reports)
    )
    for scenario_id, reports in grouped.items():
        summary.means[scenario_id] = {
            "acc_t2s": float(np.mean([r.acc_t2s for r in reports])),
            "acc_s2t": float(np.mean([r.acc_s2t for r in reports])),
            "n_seeds": len(reports),
        }

    def t2s(scenario_id: str) -> float:
        return summary.means[scenario_id]["acc_t2s"]

    def add(name: str, margin: float, strict: bool) -> None:
        holds = margin > 0 if strict else margin >= 0
        summary.checks.append(
            OrderingCheck(name=name, holds=bool(holds), margin=float(margin))
        )

    present = set(summary.means)
    chance = CHANCE_FACTOR / summary.pool_size
    for ref in REFERENCE_SCENARIOS:
        if ref in present:
            add(f"{ref} <= 3/n", chance - t2s(ref), strict=False)
    if {"A", "B"} <= present:
        add("A < B", t2s("B") - t2s("A"), strict=True)
    if {"B", "F"} <= present:
        add("B <= F", t2s("F") - t2s("B"), strict=False)
    if CASCADE_SCENARIO in present:
        for scenario_id in TRAINED_SCENARIOS:
            if scenario_id in present:
                add(
                    f"I >= {scenario_id}",
                    t2s(CASCADE_SCENARIO) - t2s(scenario_id),
                    strict=False,
                )
    if {"D", "E"} <= present:
        add("D < E", t2s("E") - t2s("D"), strict=True)
    for scenario_id in TRAINED_SCENARIOS:
        if scenario_id in present:
            means = summary.means[scenario_id]
            add(
                f"T->S >= S->T [{scenario_id}]",
                means["acc_t2s"] - means["acc_s2t"],
                strict=False,
            )

    failed = [check.name for check in summary.checks if not check.holds]
    held = len(summary.checks) - len(failed)
    suffix = f"; failed: {', '.join(failed)}" if failed else ""
    logger.info(f"matrix ordering: {held}/{len(summary.checks)} hold{suffix}")
    return summary
