# -*- coding: utf-8 -*-
"""
报告输出工具

目录结构:
  <outdir>/report.json          实验报告 (键排序, 不含时间戳)
  <outdir>/tables/*.csv         Q, e^{tQ}, lambda 表, 记录表 (pandas)
  <outdir>/plotdata/*.dat       空白分隔的列数据, 供外部绘图
  <outdir>/records/*.jsonl      ExitRecord 逐行 JSON
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """numpy 标量 / 数组转成原生类型; nan 与 inf 写成 null"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class ReportWriter:
    """
    实验报告写出器

    Args:
        out_dir: 输出目录 (自动创建)
    """

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, sub: str, name: str) -> Path:
        folder = self.out_dir / sub
        folder.mkdir(parents=True, exist_ok=True)
        return folder / name

    def write_report(self, report: dict) -> Path:
        path = self.out_dir / "report.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(report), f, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
            f.write("\n")
        logger.info(f"report written: {path}")
        return path

    def write_table(self, name: str, rows: Any) -> Path:
        """rows: DataFrame 或 list[dict]"""
        df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        path = self._path("tables", f"{name}.csv")
        df.to_csv(path, index=False)
        return path

    def write_matrix(self, name: str, matrix: np.ndarray, labels: Optional[Sequence[str]] = None) -> Path:
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[1]
        labels = list(labels) if labels is not None else [f"m{j}" for j in range(1, n + 1)]
        df = pd.DataFrame(matrix, columns=labels)
        df.insert(0, "from", labels[: matrix.shape[0]])
        return self.write_table(name, df)

    def write_plotdata(self, name: str, columns: Sequence[Sequence[float]], header: List[str]) -> Path:
        data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
        path = self._path("plotdata", f"{name}.dat")
        np.savetxt(path, data, header=" ".join(header), fmt="%.10g")
        return path

    def write_records(self, name: str, records: Iterable[Any]) -> Path:
        """ExitRecord 逐行 JSON, 同时写一份 CSV"""
        rows = [r.to_json() for r in records]
        path = self._path("records", f"{name}.jsonl")
        with open(path, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(to_jsonable(row), sort_keys=True) + "\n")
        if rows:
            self.write_table(f"{name}_records", rows)
        return path
