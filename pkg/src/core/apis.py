"""
训练运行查询服务
读取 RUNS_DIR 下每个运行目录中的 config.resolved / metrics.csv / checkpoint.crmt
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from model.checkpoint import load_checkpoint
from probe.feature_stats import feature_distance_stats
from trainer.config import RESOLVED_NAME, TrainConfig, load_config
from trainer.evaluate import evaluate
from trainer.metrics_log import METRICS_NAME, read_metrics
from trainer.runner import CHECKPOINT_NAME, load_datasets
from utils.config_file import read_config_file

logger = logging.getLogger(__name__)


class ServiceResponse(BaseModel):
    """服务响应模型"""
    success: bool
    message: str
    data: Optional[Dict[str, Any]] = None


class RunInspector:
    """只读访问训练输出目录"""

    def __init__(self, runs_dir: str = "./runs"):
        """
        :param runs_dir: 训练运行的根目录, 每个子目录是一次运行
        """
        self.runs_dir = Path(runs_dir)

    def _run_dir(self, run: str) -> Optional[Path]:
        """运行名只能是 runs_dir 下的一级非隐藏目录"""
        if not run or Path(run).name != run or run.startswith(".") or "\\" in run:
            return None
        path = self.runs_dir / run
        if path.resolve().parent != self.runs_dir.resolve():
            return None
        return path if (path / RESOLVED_NAME).is_file() else None

    def _load(self, path: Path) -> TrainConfig:
        return load_config(path / RESOLVED_NAME)

    def list_runs(self) -> ServiceResponse:
        if not self.runs_dir.is_dir():
            return ServiceResponse(success=True, message="运行目录不存在", data={"runs": []})
        runs: List[str] = sorted(p.name for p in self.runs_dir.iterdir()
                                 if not p.name.startswith(".") and (p / RESOLVED_NAME).is_file())
        return ServiceResponse(success=True, message=f"共 {len(runs)} 个运行", data={"runs": runs})

    def get_config(self, run: str) -> ServiceResponse:
        path = self._run_dir(run)
        if path is None:
            return ServiceResponse(success=False, message=f"运行 {run} 不存在")
        try:
            return ServiceResponse(success=True, message="ok", data={"config": read_config_file(path / RESOLVED_NAME)})
        except Exception as e:
            logger.error(f"读取配置失败 {run}: {e}")
            return ServiceResponse(success=False, message=f"读取配置时发生错误: {e}")

    def get_metrics(self, run: str, tail: Optional[int] = None) -> ServiceResponse:
        path = self._run_dir(run)
        if path is None:
            return ServiceResponse(success=False, message=f"运行 {run} 不存在")
        if not (path / METRICS_NAME).is_file():
            return ServiceResponse(success=False, message=f"运行 {run} 没有指标文件")
        try:
            rows = read_metrics(path / METRICS_NAME)
            if tail is not None:
                rows = rows[-tail:] if tail > 0 else []
            return ServiceResponse(success=True, message=f"{len(rows)} 行", data={"rows": rows})
        except Exception as e:
            logger.error(f"读取指标失败 {run}: {e}")
            return ServiceResponse(success=False, message=f"读取指标时发生错误: {e}")

    def evaluate_run(self, run: str) -> ServiceResponse:
        path = self._run_dir(run)
        if path is None:
            return ServiceResponse(success=False, message=f"运行 {run} 不存在")
        if not (path / CHECKPOINT_NAME).is_file():
            return ServiceResponse(success=False, message=f"运行 {run} 没有检查点")
        try:
            cfg = self._load(path)
            _, test = load_datasets(cfg)
            state, ema = load_checkpoint(path / CHECKPOINT_NAME, cfg.arch(), cfg.ema_decay)
            data = {"eval_err_raw": evaluate(state, test.images, test.labels, cfg.eval_batch_size)}
            if ema is not None:
                data["eval_err_ema"] = evaluate(ema.as_state(), test.images, test.labels, cfg.eval_batch_size)
            logger.info(f"✅ 评估完成 {run}: {data}")
            return ServiceResponse(success=True, message="评估完成", data=data)
        except Exception as e:
            logger.error(f"评估失败 {run}: {e}")
            return ServiceResponse(success=False, message=f"评估时发生错误: {e}")

    def feature_stats(self, run: str, n: int = 100) -> ServiceResponse:
        path = self._run_dir(run)
        if path is None:
            return ServiceResponse(success=False, message=f"运行 {run} 不存在")
        if not (path / CHECKPOINT_NAME).is_file():
            return ServiceResponse(success=False, message=f"运行 {run} 没有检查点")
        try:
            cfg = self._load(path)
            _, test = load_datasets(cfg)
            state, _ = load_checkpoint(path / CHECKPOINT_NAME, cfg.arch(), cfg.ema_decay)
            stats = feature_distance_stats(state, test.images, min(n, len(test)), seed=cfg.seed, aug=cfg.augment())
            return ServiceResponse(success=True, message="ok", data=stats.as_dict())
        except Exception as e:
            logger.error(f"特征统计失败 {run}: {e}")
            return ServiceResponse(success=False, message=f"特征统计时发生错误: {e}")
