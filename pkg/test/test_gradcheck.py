"""
梯度检查: 每个注册算子与六个距离度量, 20 个随机种子
"""

import numpy as np
import pytest

from tensorcore import OP_REGISTRY, Tensor, grad_check, precision
from tensorcore.ops import OpRule, Relu
from tensorcore.suite import CASES, DEFAULT_SEEDS, covered_op_kinds, run_case, run_suite


def test_every_registered_op_has_a_case():
    assert covered_op_kinds() == sorted(OP_REGISTRY)


def test_every_metric_has_a_case():
    from losses.metrics import METRICS
    assert {f"metric:{name}" for name in METRICS} <= set(CASES)


@pytest.mark.parametrize("name", sorted(CASES))
def test_case_passes(name):
    result = run_case(name, seeds=DEFAULT_SEEDS)
    assert result.passed, f"{name}: max error {result.max_error:.3e}"


def test_constant_builder_has_zero_error():
    with precision(np.float64):
        leaf = Tensor(np.ones(3))
        assert grad_check(lambda a: Tensor(3.0), [leaf]) == 0.0


def test_float32_leaves_rejected():
    with pytest.raises(ValueError):
        grad_check(lambda a: a, [Tensor(np.ones(2))])


def test_wrong_backward_is_detected(monkeypatch):
    broken = OpRule(kind="relu", forward=Relu.forward,
                    backward=lambda ctx, g: (2.0 * np.where(ctx, g, 0.0),), arity=1)
    monkeypatch.setitem(OP_REGISTRY, "relu", broken)
    result = run_case("relu", seeds=2)
    assert not result.passed
    assert result.max_error > 0.1


def test_run_suite_subset():
    results = run_suite(["add", "scale"], seeds=2)
    assert [r.name for r in results] == ["add", "scale"]
    assert all(r.passed and r.seeds == 2 for r in results)
