"""
桌面规模趋势实验 (耗时较长, 设置 CRMATCH_SLOW=1 时运行)

合成数据集: 4 类, 32x32, 每类 4 个有标签样本, 约 2000 个无标签样本, 桌面 profile (K=2000)
"""

import os
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from model import load_checkpoint
from probe import ProbeConfig, equivariance_probe, feature_distance_stats
from trainer import CHECKPOINT_NAME, build_config, evaluate, load_datasets, run_training
from trainer.metrics_log import METRICS_NAME, read_metrics

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.getenv("CRMATCH_SLOW", "0") != "1", reason="desk-scale runs take hours"),
]

SEEDS = range(5)
RUNS_DIR = Path(os.getenv("CRMATCH_EXPERIMENT_DIR", "runs/experiments"))


@lru_cache(maxsize=None)
def _run(tag: str, index: int, **overrides):
    values = {"desk_profile": "true", "split_index": str(index), "seed": str(index),
              "eval_every": "0", "log_every": "100", **overrides}
    cfg = build_config(overrides=values)
    out = RUNS_DIR / f"{tag}-{index}"
    result = run_training(cfg, out)
    _, ema = load_checkpoint(out / CHECKPOINT_NAME, cfg.arch(), cfg.ema_decay)
    return cfg, result, ema.as_state()


def _full(i):
    return _run("cr-equiv", i, dist_metric="cosine_similarity")


def test_deterministic_desk_training(tmp_path):
    cfg = build_config(overrides={"desk_profile": "true", "total_steps": "200"})
    run_training(cfg, tmp_path / "a")
    run_training(cfg, tmp_path / "b")
    assert (tmp_path / "a" / METRICS_NAME).read_bytes() == (tmp_path / "b" / METRICS_NAME).read_bytes()
    _, test = load_datasets(cfg)
    _, ema = load_checkpoint(tmp_path / "a" / CHECKPOINT_NAME, cfg.arch(), cfg.ema_decay)
    final = read_metrics(tmp_path / "a" / METRICS_NAME)[-1]
    assert final["eval_err_ema"] == pytest.approx(evaluate(ema.as_state(), test.images, test.labels,
                                                               cfg.eval_batch_size), abs=1e-8)


def test_unlabeled_data_improves_error():
    full = np.mean([_full(i)[1].eval_err_ema for i in SEEDS])
    baseline = np.mean([_run("supervised", i, lambda_u="0", lambda_r="0")[1].eval_err_ema for i in SEEDS])
    assert baseline - full >= 0.05


def test_equivariance_beats_invariance():
    equiv = np.mean([_full(i)[1].eval_err_ema for i in SEEDS])
    inv = np.mean([_run("cr-inv", i, dist_metric="cosine_distance")[1].eval_err_ema for i in SEEDS])
    plain = np.mean([_run("no-dist", i, dist_metric="none")[1].eval_err_ema for i in SEEDS])
    assert equiv <= inv <= plain


def test_strong_vs_weak_probe_separates_equivariant_features():
    for i in SEEDS:
        cfg, _, equiv_state = _full(i)
        _, _, inv_state = _run("cr-inv", i, dist_metric="cosine_distance")
        _, test = load_datasets(cfg)
        probe_cfg = ProbeConfig(transform="strong_vs_weak", seed=i)
        assert equivariance_probe(equiv_state, test.images, probe_cfg) < \
            equivariance_probe(inv_state, test.images, probe_cfg)


def test_feature_distance_ordering():
    equiv_means, inv_means = [], []
    for i in SEEDS:
        cfg, _, equiv_state = _full(i)
        _, _, inv_state = _run("cr-inv", i, dist_metric="cosine_distance")
        _, test = load_datasets(cfg)
        for state, bucket in ((equiv_state, equiv_means), (inv_state, inv_means)):
            stats = feature_distance_stats(state, test.images, n=min(100, len(test)), seed=i, aug=cfg.augment())
            assert stats.pairs["weak_orig"][0] <= stats.pairs["strong_orig"][0]
            bucket.append(stats.pairs["strong_orig"][0])
    assert np.mean(equiv_means) > np.mean(inv_means)
