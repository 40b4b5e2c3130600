"""运行目录

布局::

    <runs>/<scenario>/<seed>/config        实验配置的规范文本（含 [scenario] 表）
    <runs>/<scenario>/<seed>/history.csv   step,lr,ce,l2,total,split
    <runs>/<scenario>/<seed>/best.ckpt
    <runs>/<scenario>/<seed>/final.ckpt
    <runs>/<scenario>/<seed>/summary.json
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import toml

from ..config import ExperimentConfig, canonical_text
from ..exceptions import CheckpointError
from ..models.checkpoint import save_checkpoint
from ..types.configs import BundleConfig, StrictModel
from ..types.records import HistoryRow

HISTORY_FIELDS = ["step", "lr", "ce", "l2", "total", "split"]


class RunDirectory:
    """一个 (场景, 种子) 的持久化目录"""

    def __init__(self, root: Union[str, Path], scenario_id: str, seed: int):
        self.scenario_id = scenario_id
        self.seed = seed
        self.path = Path(root) / scenario_id / str(seed)

    def ensure(self) -> "RunDirectory":
        self.path.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def best_checkpoint(self) -> Path:
        return self.path / "best.ckpt"

    @property
    def final_checkpoint(self) -> Path:
        return self.path / "final.ckpt"

    def write_config(
        self, config: ExperimentConfig, scenario: Optional[StrictModel] = None
    ) -> Path:
        text = canonical_text(config)
        if scenario is not None:
            text += "\n" + toml.dumps({"scenario": scenario.model_dump(mode="json")})
        target = self.ensure().path / "config"
        target.write_text(text, encoding="utf-8")
        return target

    def write_history(self, history: List[HistoryRow]) -> Path:
        target = self.ensure().path / "history.csv"
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=HISTORY_FIELDS)
            writer.writeheader()
            for row in history:
                writer.writerow(row.to_row())
        return target

    def read_history(self) -> List[Dict[str, Any]]:
        target = self.path / "history.csv"
        if not target.exists():
            raise CheckpointError(f"no history in {self.path}", path=str(self.path))
        with target.open(newline="", encoding="utf-8") as handle:
            return [
                {
                    "step": int(row["step"]),
                    "lr": float(row["lr"]),
                    "ce": float(row["ce"]),
                    "l2": float(row["l2"]),
                    "total": float(row["total"]),
                    "split": row["split"],
                }
                for row in csv.DictReader(handle)
            ]

    def save_checkpoints(
        self,
        config: BundleConfig,
        best: Dict[str, np.ndarray],
        final: Dict[str, np.ndarray],
    ) -> Dict[str, str]:
        """写出 best/final 检查点，返回内容哈希"""
        self.ensure()
        return {
            "best.ckpt": save_checkpoint(self.best_checkpoint, config, best),
            "final.ckpt": save_checkpoint(self.final_checkpoint, config, final),
        }

    def write_summary(self, summary: Dict[str, Any]) -> Path:
        target = self.ensure().path / "summary.json"
        target.write_text(
            json.dumps(summary, indent=2, sort_keys=True, ensure_ascii=False),
            encoding="utf-8",
        )
        return target

    def read_summary(self) -> Dict[str, Any]:
        target = self.path / "summary.json"
        if not target.exists():
            raise CheckpointError(f"no summary in {self.path}", path=str(self.path))
        return json.loads(target.read_text(encoding="utf-8"))
