"""
训练指标 CSV
"""

import csv
from pathlib import Path
from typing import Dict, List, Optional

from trainer.step import StepMetrics

METRICS_NAME = "metrics.csv"
HEADER = ["step", "lr", "loss_total", "loss_sup", "loss_pseudo", "loss_dist", "loss_rot", "mask_rate",
          "pseudo_err_all", "pseudo_err_masked", "eval_err_raw", "eval_err_ema"]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.8g}"


class MetricsWriter:
    """每个记录间隔写一行, 缺失的评估值留空"""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = self.path.open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(HEADER)

    def write(self, metrics: StepMetrics):
        row = metrics.as_dict()
        self._writer.writerow([_format(row[name]) for name in HEADER])
        self._file.flush()

    def close(self):
        self._file.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()


def _parse(value: str) -> Optional[float]:
    return float(value) if value != "" else None


def read_metrics(path) -> List[Dict[str, Optional[float]]]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [{k: _parse(v) for k, v in row.items()} for row in reader]
