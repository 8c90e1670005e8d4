"""
完整训练运行: 数据, 划分, 模型, 训练循环, 指标与检查点输出
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from dataio.cifar import NUM_CLASSES as CIFAR_CLASSES
from dataio.cifar import load_cifar10
from dataio.dataset import Dataset
from dataio.synthetic import SyntheticSpec, generate_synthetic
from model.checkpoint import save_checkpoint
from model.ema import EmaState
from model.network import ModelState
from trainer.batches import BatchBuilder
from trainer.config import TrainConfig, write_resolved
from trainer.evaluate import evaluate
from trainer.metrics_log import METRICS_NAME, MetricsWriter
from trainer.optim import SGD
from trainer.splits import SPLITS_NAME, Split, load_splits, make_splits, select_split
from trainer.step import StepMetrics, train_step
from utils.config_file import ConfigError

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.crmt"


@dataclass
class RunResult:
    out_dir: Path
    final: StepMetrics
    eval_err_raw: float
    eval_err_ema: float


def load_datasets(cfg: TrainConfig) -> Tuple[Dataset, Dataset]:
    """按配置读取 (训练集, 测试集)"""
    if cfg.dataset == "cifar":
        if not cfg.data_path:
            raise ConfigError("dataset = cifar needs data_path")
        if cfg.num_classes != CIFAR_CLASSES:
            raise ConfigError(f"dataset = cifar needs num_classes = {CIFAR_CLASSES}")
        return load_cifar10(cfg.data_path)
    common = dict(num_classes=cfg.num_classes, image_size=cfg.image_size, seed=cfg.split_seed)
    train = generate_synthetic(SyntheticSpec(samples_per_class=cfg.samples_per_class, partition="train", **common))
    test = generate_synthetic(SyntheticSpec(samples_per_class=cfg.test_per_class, partition="test", **common))
    return train, test


def resolve_split(cfg: TrainConfig, train: Dataset) -> Split:
    """数据目录中存在 splits.json 时复用, 否则按 split_seed 生成"""
    if cfg.data_path:
        saved = Path(cfg.data_path) / SPLITS_NAME
        if saved.is_file():
            logger.info(f"使用已保存的划分: {saved}")
            splits = load_splits(saved, labels_per_class=cfg.labels_per_class, num_samples=len(train))
            return select_split(splits, cfg.split_index)
    splits = make_splits(train.labels, cfg.labels_per_class, n_splits=5, seed=cfg.split_seed)
    return select_split(splits, cfg.split_index)


class Trainer:
    """持有一次运行的全部可变状态, 训练线程是参数的唯一写者"""

    def __init__(self, cfg: TrainConfig, out_dir, train: Optional[Dataset] = None, test: Optional[Dataset] = None):
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        if train is None or test is None:
            train, test = load_datasets(cfg)
        self.train_set = train
        self.test_set = test
        self.split = resolve_split(cfg, train)
        self.state = ModelState.create(cfg.arch(), cfg.seed)
        self.ema = EmaState.from_state(self.state, cfg.ema_decay)
        self.optimizer = SGD(self.state.parameters(), momentum=cfg.momentum, weight_decay=cfg.weight_decay,
                             nesterov=cfg.nesterov)
        self.batches = BatchBuilder(train.images, train.labels, self.split, cfg)

    def evaluate(self) -> Tuple[float, float]:
        raw = evaluate(self.state, self.test_set.images, self.test_set.labels, self.cfg.eval_batch_size)
        ema = evaluate(self.ema.as_state(), self.test_set.images, self.test_set.labels, self.cfg.eval_batch_size)
        return raw, ema

    def run(self) -> RunResult:
        """
        训练 total_steps 步, 输出 config.resolved / metrics.csv / checkpoint.crmt

        :return: 最后一步指标与最终错误率
        """
        cfg = self.cfg
        write_resolved(cfg, self.out_dir)
        logger.info(f"🚀 开始训练: {cfg.total_steps} 步, B_s={cfg.B_s}, B_u={cfg.B_u}, "
                    f"labeled={len(self.split.labeled)}, unlabeled={len(self.split.unlabeled)}")
        last: Optional[StepMetrics] = None
        with MetricsWriter(self.out_dir / METRICS_NAME) as writer:
            for batch in self.batches.iterate(0, cfg.total_steps, cfg.workers):
                metrics = train_step(self.state, self.ema, batch, cfg, self.optimizer)
                done = metrics.step
                is_last = done == cfg.total_steps
                should_eval = is_last or (cfg.eval_every > 0 and done % cfg.eval_every == 0)
                if should_eval:
                    metrics.eval_err_raw, metrics.eval_err_ema = self.evaluate()
                    logger.info(f"📊 step {done}: eval_err_raw={metrics.eval_err_raw:.4f} "
                                f"eval_err_ema={metrics.eval_err_ema:.4f}")
                if should_eval or done % cfg.log_every == 0:
                    writer.write(metrics)
                    logger.info(f"step {done}/{cfg.total_steps} lr={metrics.lr:.5f} loss={metrics.loss_total:.4f} "
                                f"sup={metrics.loss_sup:.4f} pseudo={metrics.loss_pseudo:.4f} "
                                f"dist={metrics.loss_dist:.4f} rot={metrics.loss_rot:.4f} "
                                f"mask={metrics.mask_rate:.3f}")
                last = metrics

        save_checkpoint(self.out_dir / CHECKPOINT_NAME, self.state, self.ema)
        logger.info(f"✅ 训练完成: {self.out_dir}")
        return RunResult(out_dir=self.out_dir, final=last, eval_err_raw=last.eval_err_raw,
                         eval_err_ema=last.eval_err_ema)


def run_training(cfg: TrainConfig, out_dir=None) -> RunResult:
    out = out_dir or cfg.out_dir or "runs/default"
    return Trainer(cfg, out).run()
