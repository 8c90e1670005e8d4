"""
命令行测试
"""

import pytest

from cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from conftest import TINY_OVERRIDES
from probe import read_features
from trainer.metrics_log import METRICS_NAME
from trainer.splits import load_splits


def _sets(extra=None):
    args = []
    for key, value in {**TINY_OVERRIDES, **(extra or {})}.items():
        args += ["--set", f"{key}={value}"]
    return args


@pytest.mark.parametrize("argv", [
    ["bogus-command"],
    ["train", "--set", "bogus=1"],
    ["train", "--set", "tau=2"],
    ["train", "--set", "tau"],
    ["grad-check", "--case", "no_such_case"],
    ["augment-preview", "--n", "0"],
    ["probe"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_help_exits_cleanly():
    assert main(["--help"]) == EXIT_OK


def test_grad_check_subset(capsys):
    assert main(["grad-check", "--case", "relu", "--case", "metric:cosine_similarity", "--seeds", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "relu" in out and "ok" in out


def test_augment_preview(tmp_path):
    out = tmp_path / "preview"
    assert main(["augment-preview", "--seed", "7", "--n", "3", "--out", str(out)] + _sets()) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["strong_000.ppm", "strong_001.ppm", "strong_002.ppm"]
    assert main(["augment-preview", "--mode", "weak", "--n", "1", "--out", str(out)] + _sets()) == EXIT_OK
    assert (out / "weak_000.ppm").read_bytes().startswith(b"P6")


def test_train_is_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["train", "--out", str(tmp_path / name)] + _sets()) == EXIT_OK
    assert "eval_err_ema=" in capsys.readouterr().out
    assert (tmp_path / "a" / METRICS_NAME).read_bytes() == (tmp_path / "b" / METRICS_NAME).read_bytes()


def test_train_from_config_file(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("".join(f"{k} = {v}\n" for k, v in TINY_OVERRIDES.items()) + "dist_metric = none\n")
    assert main(["train", "--config", str(cfg), "--set", "total_steps=2", "--out", str(tmp_path / "run")]) == EXIT_OK
    assert "dist_metric = none" in (tmp_path / "run" / "config.resolved").read_text()


def test_eval_and_summarize(trained_run, capsys):
    assert main(["eval", "--run", str(trained_run)]) == EXIT_OK
    assert main(["summarize", str(trained_run), str(trained_run)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "eval_err_raw=" in out and "mean over 2 runs" in out


def test_summarize_missing_run(tmp_path):
    assert main(["summarize", str(tmp_path / "nothing")]) == EXIT_FAILURE


def test_probe_command(trained_run, tmp_path, capsys):
    results = tmp_path / "probe.csv"
    argv = ["probe", "--run", str(trained_run), "--transform", "identity", "--n", "10", "--train-fraction", "0.5",
            "--epochs", "2", "--tag", "tiny", "--results", str(results)]
    assert main(argv) == EXIT_OK
    assert "tiny,identity,0.5000" in capsys.readouterr().out
    assert results.read_text().splitlines()[1] == "tiny,identity,0.5"


def test_feature_stats_and_export(trained_run, tmp_path, capsys):
    assert main(["feature-stats", "--run", str(trained_run), "--n", "4"]) == EXIT_OK
    assert "weak_strong" in capsys.readouterr().out
    out = tmp_path / "test.feat"
    assert main(["export-features", "--run", str(trained_run), "--out", str(out), "--weights", "raw"]) == EXIT_OK
    features, labels = read_features(out)
    assert features.shape == (10, 16) and len(labels) == 10


def test_make_splits(tmp_path):
    assert main(["make-splits", "--out", str(tmp_path)] + _sets()) == EXIT_OK
    splits = load_splits(tmp_path / "splits.json")
    assert len(splits) == 5 and all(len(s.labeled) == 4 for s in splits)
