"""
命令行入口

    python src/cli.py train --config desk.cfg --set dist_metric=none --out runs/inv
    python src/cli.py grad-check
    python src/cli.py augment-preview --seed 7 --n 60 --out preview/
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from augment.pipeline import strong_augment, weak_augment
from augment.rng import make_rng
from dataio.ppm import write_ppm
from model.checkpoint import load_checkpoint
from probe.equivariance import PROBE_TRANSFORMS, ProbeConfig, append_probe_result, equivariance_probe
from probe.export import export_features
from probe.feature_stats import feature_distance_stats
from tensorcore.suite import CASES, run_suite
from trainer.config import RESOLVED_NAME, load_config
from trainer.evaluate import evaluate
from trainer.metrics_log import METRICS_NAME, read_metrics
from trainer.runner import CHECKPOINT_NAME, load_datasets, run_training
from trainer.splits import SPLITS_NAME, make_splits, save_splits
from utils.config_file import ConfigError, parse_overrides

logger = logging.getLogger("crmatch")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """命令行参数错误 (退出码 2)"""


def _config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key = value 配置文件")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="覆盖配置项, 可重复")
    parser.add_argument("--desk", action="store_true", help="使用桌面规模 profile (B_s=16, mu=4, K=2000)")


def _run_args(parser: argparse.ArgumentParser):
    parser.add_argument("--run", required=True, help="训练输出目录 (含 config.resolved 与 checkpoint.crmt)")
    parser.add_argument("--weights", choices=["ema", "raw"], default="ema", help="使用的参数")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crmatch", description="CR-Match 半监督训练与分析工具")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 日志")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("train", help="训练一个模型")
    _config_args(p)
    p.add_argument("--out", help="输出目录, 默认 out_dir 或 runs/default")

    p = sub.add_parser("eval", help="用检查点评估测试集错误率")
    p.add_argument("--run", required=True)

    p = sub.add_parser("probe", help="线性 SVM 等变性探针")
    _run_args(p)
    p.add_argument("--transform", default="strong_vs_weak",
                   choices=["translation", "scaling", "rotation", "color_jitter", "strong_vs_weak", "identity", "all"])
    p.add_argument("--n", type=int, default=1000, help="使用的测试图像数")
    p.add_argument("--train-fraction", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--feature", choices=["feat_b", "feat_a"], default="feat_b")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tag", help="结果 CSV 中的 model_tag, 默认运行目录名")
    p.add_argument("--results", help="结果 CSV, 默认 <run>/probe_results.csv")

    p = sub.add_parser("feature-stats", help="增强视图之间的特征余弦距离")
    _run_args(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("grad-check", help="运行全部梯度检查用例")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--case", action="append", default=[], help="只运行指定用例, 可重复")

    p = sub.add_parser("augment-preview", help="输出增强样例 PPM 图像")
    _config_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--mode", choices=["strong", "weak"], default="strong")
    p.add_argument("--out", default="preview")

    p = sub.add_parser("make-splits", help="生成并保存 5 个有标签划分")
    _config_args(p)
    p.add_argument("--out", help="splits.json 所在目录, 默认 data_path")

    p = sub.add_parser("export-features", help="导出冻结特征 (FEAT 格式)")
    _run_args(p)
    p.add_argument("--out", required=True, help="输出文件")
    p.add_argument("--split", choices=["test", "train"], default="test")
    p.add_argument("--feature", choices=["feat_b", "feat_a"], default="feat_b")

    p = sub.add_parser("summarize", help="多个运行的最终错误率均值 ± 标准差")
    p.add_argument("runs", nargs="+", help="运行目录")

    p = sub.add_parser("serve", help="启动训练运行查询 HTTP 服务")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--runs-dir")
    return parser


def _load_cfg(args):
    overrides = parse_overrides(args.overrides)
    if getattr(args, "desk", False):
        overrides.setdefault("desk_profile", "true")
    return load_config(args.config, overrides)


def _load_run(run_dir, weights: str = "ema"):
    run = Path(run_dir)
    cfg = load_config(run / RESOLVED_NAME)
    state, ema = load_checkpoint(run / CHECKPOINT_NAME, cfg.arch(), cfg.ema_decay)
    if weights == "ema" and ema is not None:
        state = ema.as_state()
    train, test = load_datasets(cfg)
    return cfg, state, ema, train, test


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    result = run_training(cfg, args.out)
    print(f"eval_err_raw={result.eval_err_raw:.4f} eval_err_ema={result.eval_err_ema:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, state, ema, _, test = _load_run(args.run, weights="raw")
    raw = evaluate(state, test.images, test.labels, cfg.eval_batch_size)
    line = f"eval_err_raw={raw:.4f}"
    if ema is not None:
        line += f" eval_err_ema={evaluate(ema.as_state(), test.images, test.labels, cfg.eval_batch_size):.4f}"
    print(line)
    return EXIT_OK


def cmd_probe(args) -> int:
    _, state, _, _, test = _load_run(args.run, args.weights)
    images = test.images[:args.n]
    transforms = PROBE_TRANSFORMS if args.transform == "all" else (args.transform,)
    tag = args.tag or Path(args.run).resolve().name
    results = Path(args.results) if args.results else Path(args.run) / "probe_results.csv"
    for name in transforms:
        cfg = ProbeConfig(transform=name, train_fraction=args.train_fraction, lr=args.lr, epochs=args.epochs,
                          seed=args.seed, feature=args.feature)
        error = equivariance_probe(state, images, cfg)
        append_probe_result(results, tag, name, error)
        print(f"{tag},{name},{error:.4f}")
    logger.info(f"📝 探针结果已追加到 {results}")
    return EXIT_OK


def cmd_feature_stats(args) -> int:
    cfg, state, _, _, test = _load_run(args.run, args.weights)
    stats = feature_distance_stats(state, test.images, min(args.n, len(test)), seed=args.seed, aug=cfg.augment())
    for name, (mean, std) in stats.pairs.items():
        print(f"{name}: {mean:.4f} ± {std:.4f}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    unknown = [c for c in args.case if c not in CASES]
    if unknown:
        raise UsageError(f"unknown grad-check cases: {unknown}; available: {sorted(CASES)}")
    results = run_suite(args.case or None, seeds=args.seeds, tolerance=args.tolerance)
    for r in results:
        print(f"{r.name:<28} {r.max_error:.3e} {'ok' if r.passed else 'FAIL'}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"❌ 梯度检查失败: {failed}")
        return EXIT_FAILURE
    logger.info(f"✅ 全部 {len(results)} 个梯度检查用例通过")
    return EXIT_OK


def cmd_augment_preview(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = _load_cfg(args)
    train, _ = load_datasets(cfg)
    aug = cfg.augment()
    fn = strong_augment if args.mode == "strong" else weak_augment
    order = make_rng(args.seed, "preview").permutation(len(train))
    out = Path(args.out)
    for i in range(args.n):
        img = train.images[order[i % len(order)]]
        write_ppm(out / f"{args.mode}_{i:03d}.ppm", fn(img, make_rng(args.seed, "preview", i), aug))
    logger.info(f"📝 {args.n} 张 {args.mode} 增强样例已写入 {out}")
    return EXIT_OK


def cmd_make_splits(args) -> int:
    cfg = _load_cfg(args)
    target = args.out or cfg.data_path
    if not target:
        raise UsageError("make-splits needs --out or data_path")
    train, _ = load_datasets(cfg)
    splits = make_splits(train.labels, cfg.labels_per_class, n_splits=5, seed=cfg.split_seed)
    path = save_splits(Path(target) / SPLITS_NAME, splits, cfg.labels_per_class, cfg.split_seed)
    print(path)
    return EXIT_OK


def cmd_export_features(args) -> int:
    _, state, _, train, test = _load_run(args.run, args.weights)
    data = test if args.split == "test" else train
    export_features(state, data.images, data.labels, args.out, args.feature)
    return EXIT_OK


def _final_errors(run_dir: Path):
    rows = [r for r in read_metrics(run_dir / METRICS_NAME) if r["eval_err_raw"] is not None]
    if not rows:
        raise ValueError(f"{run_dir}: no evaluation rows in metrics")
    return rows[-1]["eval_err_raw"], rows[-1]["eval_err_ema"]


def cmd_summarize(args) -> int:
    finals = [_final_errors(Path(run)) for run in args.runs]
    for run, (raw, ema) in zip(args.runs, finals):
        print(f"{run}: raw={raw:.4f} ema={ema:.4f}")
    values = np.array(finals, dtype=np.float64)
    ddof = 1 if len(values) > 1 else 0
    mean, std = values.mean(axis=0), values.std(axis=0, ddof=ddof)
    print(f"mean over {len(values)} runs: raw={mean[0]:.4f} ± {std[0]:.4f} ema={mean[1]:.4f} ± {std[1]:.4f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from start_api import serve  # start_api 导入时调用 logging.basicConfig

    serve(host=args.host, port=args.port, runs_dir=args.runs_dir)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "probe": cmd_probe,
    "feature-stats": cmd_feature_stats,
    "grad-check": cmd_grad_check,
    "augment-preview": cmd_augment_preview,
    "make-splits": cmd_make_splits,
    "export-features": cmd_export_features,
    "summarize": cmd_summarize,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    :param argv: 命令行参数, 默认 sys.argv[1:]
    :return: 退出码 (0 成功, 1 运行失败, 2 用法或配置错误)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        parser.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"❌ {args.command} 失败: {e}")
        logger.debug("traceback", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
