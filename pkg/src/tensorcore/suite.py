"""
梯度检查用例集: 每个注册算子与六个距离度量, 每个用例多个随机种子
grad-check 命令与测试共用
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tensorcore import ops
from tensorcore.gradcheck import grad_check
from tensorcore.tensor import Tensor, no_grad, precision

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = 20
DEFAULT_TOLERANCE = 1e-4

# (builder, leaves) 生成器
CaseFactory = Callable[[np.random.Generator], Tuple[Callable[..., Tensor], List[Tensor]]]


@dataclass
class CaseResult:
    name: str
    max_error: float
    seeds: int
    passed: bool


def _leaf(data: np.ndarray) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64))


def _away_from_zero(rng: np.random.Generator, shape, low: float = 0.1, high: float = 1.0) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, high, size=shape)


class _Projector:
    """固定随机权重的加权求和, 把任意形状输出变成标量"""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.weights: Optional[Tensor] = None

    def __call__(self, out: Tensor) -> Tensor:
        if self.weights is None:
            self.weights = Tensor(self.rng.normal(size=out.shape))
        return ops.tsum(ops.mul(out, self.weights))


def _unary(fn: Callable[[Tensor], Tensor], sample: Callable[[np.random.Generator], np.ndarray]) -> CaseFactory:
    def factory(rng):
        project = _Projector(rng)
        return (lambda a: project(fn(a))), [_leaf(sample(rng))]
    return factory


def _binary(fn: Callable[[Tensor, Tensor], Tensor], shapes: Tuple[tuple, tuple]) -> CaseFactory:
    def factory(rng):
        project = _Projector(rng)
        return (lambda a, b: project(fn(a, b))), [_leaf(rng.normal(size=s)) for s in shapes]
    return factory


def _conv_case(stride: int, pad: int, bias: bool) -> CaseFactory:
    def factory(rng):
        project = _Projector(rng)
        leaves = [_leaf(rng.normal(size=(2, 2, 5, 5))), _leaf(rng.normal(size=(3, 2, 3, 3)))]
        if bias:
            leaves.append(_leaf(rng.normal(size=(3,))))
        return (lambda *ts: project(ops.conv2d(*ts, stride=stride, pad=pad))), leaves
    return factory


def _conv_chain(rng):
    """conv -> relu -> 2x2 平均池化 -> flatten -> 线性层"""
    pool = np.zeros((2, 2, 2, 2))
    pool[[0, 1], [0, 1]] = 0.25
    pool_kernel = Tensor(pool)
    while True:
        x = _leaf(rng.normal(size=(2, 3, 4, 4)))
        w = _leaf(rng.normal(size=(2, 3, 3, 3)) * 0.5)
        b = _leaf(rng.normal(size=(2,)) * 0.1)
        with no_grad():
            pre = ops.conv2d(x, w, b, stride=1, pad=1).data
        # 远离 relu 拐点, 差分才有意义
        if np.abs(pre).min() > 1e-3:
            break
    fc = _leaf(rng.normal(size=(8, 3)))
    project = _Projector(rng)

    def build(x, w, b, fc):
        h = ops.relu(ops.conv2d(x, w, b, stride=1, pad=1))
        h = ops.conv2d(h, pool_kernel, stride=2, pad=0)
        return project(ops.matmul(ops.flatten(h), fc))
    return build, [x, w, b, fc]


def _metric_case(name: str) -> CaseFactory:
    def factory(rng):
        from losses.metrics import feat_dist_loss
        leaves = [_leaf(rng.normal(size=(2, 8))), _leaf(rng.normal(size=(2, 8)))]
        return (lambda a, b: feat_dist_loss(name, a, b)), leaves
    return factory


def _log_sample(rng):
    out = rng.uniform(0.5, 2.0, size=(3, 4))
    out[:, :2] *= -1
    return out


CASES: Dict[str, CaseFactory] = {
    "matmul": _binary(ops.matmul, ((3, 4), (4, 2))),
    "add": _binary(ops.add, ((3, 4), (3, 4))),
    "add_broadcast": _binary(ops.add, ((3, 4), (4,))),
    "mul": _binary(ops.mul, ((3, 4), (3, 4))),
    "mul_broadcast": _binary(ops.mul, ((2, 3, 4), (3, 4))),
    "scale": _unary(lambda a: ops.scale(a, -1.7), lambda r: r.normal(size=(3, 4))),
    "relu": _unary(ops.relu, lambda r: _away_from_zero(r, (3, 4))),
    "exp": _unary(ops.exp, lambda r: r.normal(size=(3, 4))),
    "log": _unary(ops.log, lambda r: r.uniform(0.5, 2.0, size=(3, 4))),
    "log_floor": _unary(lambda a: ops.log(a, floor=1e-8), _log_sample),
    "sqrt": _unary(ops.sqrt, lambda r: r.uniform(0.5, 2.0, size=(3, 4))),
    "sum": _unary(lambda a: ops.tsum(a, axis=1), lambda r: r.normal(size=(3, 4))),
    "mean": _unary(lambda a: ops.mean(a, axis=0), lambda r: r.normal(size=(3, 4))),
    "flatten": _unary(ops.flatten, lambda r: r.normal(size=(2, 3, 2, 2))),
    "take_rows": _unary(lambda a: ops.take_rows(a, (2, 0, 2)), lambda r: r.normal(size=(4, 3))),
    "global_avg_pool": _unary(ops.global_avg_pool, lambda r: r.normal(size=(2, 3, 3, 3))),
    "log_softmax": _unary(ops.log_softmax, lambda r: r.normal(size=(3, 5))),
    "l2_normalize": _unary(ops.l2_normalize, lambda r: r.normal(size=(3, 5))),
    "conv2d": _conv_case(stride=1, pad=1, bias=True),
    "conv2d_strided": _conv_case(stride=2, pad=0, bias=False),
    "conv_chain": _conv_chain,
    "metric:cosine_similarity": _metric_case("cosine_similarity"),
    "metric:l2_similarity": _metric_case("l2_similarity"),
    "metric:negative_js": _metric_case("negative_js"),
    "metric:cosine_distance": _metric_case("cosine_distance"),
    "metric:l2_distance": _metric_case("l2_distance"),
    "metric:js_divergence": _metric_case("js_divergence"),
}


def run_case(name: str, seeds: int = DEFAULT_SEEDS, tolerance: float = DEFAULT_TOLERANCE) -> CaseResult:
    factory = CASES[name]
    worst = 0.0
    with precision(np.float64):
        for seed in range(seeds):
            rng = np.random.default_rng([seed, sorted(CASES).index(name)])
            builder, leaves = factory(rng)
            worst = max(worst, grad_check(builder, leaves))
    return CaseResult(name=name, max_error=worst, seeds=seeds, passed=worst < tolerance)


def run_suite(names: Optional[Sequence[str]] = None, seeds: int = DEFAULT_SEEDS,
              tolerance: float = DEFAULT_TOLERANCE) -> List[CaseResult]:
    """
    运行梯度检查用例

    :param names: 用例名称, 默认全部
    :param seeds: 每个用例的随机种子数
    :param tolerance: 最大相对误差阈值
    """
    results = []
    for name in names or list(CASES):
        result = run_case(name, seeds, tolerance)
        status = "✅" if result.passed else "❌"
        logger.info(f"{status} {name}: max error {result.max_error:.3e} ({seeds} seeds)")
        results.append(result)
    return results


def covered_op_kinds() -> List[str]:
    """用例覆盖的算子类型 (由名称前缀推出)"""
    return sorted({name.split("_broadcast")[0].split("_strided")[0].replace("log_floor", "log")
                   for name in CASES if not name.startswith("metric:") and name != "conv_chain"})
