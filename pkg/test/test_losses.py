"""
距离度量与训练目标测试
"""

import math

import numpy as np
import pytest

from losses import (
    LN2,
    METRICS,
    LossInputError,
    MetricError,
    feat_dist_loss,
    js_divergence_dist,
    make_pseudo_labels,
    metric_eval,
    metric_per_sample,
    pseudo_label_loss,
    rotation_loss,
    supervised_loss,
    total_objective,
    unlabeled_loss,
)
from model import FeatureBundle
from tensorcore import Tape, Tensor, backward, precision


def _vec(values):
    return Tensor(np.asarray(values, dtype=np.float64))


def _bundle(logits, proj=None, requires_grad=False):
    proj = np.ones((len(logits), 4)) if proj is None else proj
    return FeatureBundle(feat_a=None, feat_b=None,
                         logits=Tensor(logits, requires_grad=requires_grad),
                         proj=Tensor(proj, requires_grad=requires_grad))


def test_metric_identities():
    with precision(np.float64):
        v = _vec([0.3, -1.2, 2.0, 0.5])
        assert metric_eval("cosine_similarity", v, v).item() == pytest.approx(1.0)
        assert metric_eval("cosine_distance", v, v).item() == pytest.approx(0.0, abs=1e-12)
        assert metric_eval("l2_similarity", v, v).item() == pytest.approx(0.0, abs=1e-12)
        assert metric_eval("l2_distance", v, v).item() == 0.0
        assert metric_eval("js_divergence", v, v).item() == pytest.approx(0.0, abs=1e-12)
        assert metric_eval("cosine_similarity", _vec([1, 0]), _vec([0, 1])).item() == pytest.approx(0.0)


def test_js_between_disjoint_deltas_is_ln2():
    with precision(np.float64):
        value = js_divergence_dist(_vec([1.0, 0.0]), _vec([0.0, 1.0])).item()
    assert abs(value - math.log(2)) <= 1e-9
    assert LN2 == pytest.approx(math.log(2))


def test_metric_values_and_ranges():
    rng = np.random.default_rng(0)
    with precision(np.float64):
        a, b = _vec(rng.normal(size=(50, 6))), _vec(rng.normal(size=(50, 6)))
        cs = metric_per_sample("cosine_similarity", a, b).data
        cd = metric_per_sample("cosine_distance", a, b).data
        l2s = metric_per_sample("l2_similarity", a, b).data
        l2d = metric_per_sample("l2_distance", a, b).data
        js = metric_per_sample("js_divergence", a, b).data
        njs = metric_per_sample("negative_js", a, b).data
    np.testing.assert_allclose(cs + cd, 1.0)
    np.testing.assert_allclose(js + njs, 0.0)
    np.testing.assert_allclose(l2d, ((a.data - b.data) ** 2).sum(axis=1))
    assert np.all((-2.0 - 1e-12 <= l2s) & (l2s <= 0.0))
    assert np.all((0.0 <= js) & (js <= LN2 + 1e-12))
    assert np.all((-1.0 - 1e-12 <= cs) & (cs <= 1.0 + 1e-12))


@pytest.mark.parametrize("name", sorted(METRICS))
def test_metrics_are_symmetric(name):
    rng = np.random.default_rng(1)
    with precision(np.float64):
        a, b = _vec(rng.normal(size=(5, 4))), _vec(rng.normal(size=(5, 4)))
        np.testing.assert_allclose(metric_per_sample(name, a, b).data, metric_per_sample(name, b, a).data,
                                   atol=1e-12)


def test_polarity():
    equivariance = {m.name for m in METRICS.values() if m.polarity == "equivariance"}
    assert equivariance == {"cosine_similarity", "l2_similarity", "negative_js"}


def test_metric_errors():
    with pytest.raises(MetricError):
        metric_eval("cosine_similarity", _vec([0.0, 0.0]), _vec([1.0, 0.0]))
    with pytest.raises(MetricError):
        metric_eval("l2_distance", _vec([1.0, 2.0, 3.0]), _vec([1.0, 2.0]))
    with pytest.raises(MetricError):
        metric_eval("l2_distance", _vec([[1.0, 2.0]]), _vec([[1.0, 2.0]]))
    with pytest.raises(MetricError):
        metric_eval("manhattan", _vec([1.0, 2.0]), _vec([1.0, 2.0]))


def test_feat_dist_loss_on_identical_projections():
    with precision(np.float64):
        p = _vec(np.random.default_rng(2).normal(size=(4, 8)))
        assert feat_dist_loss("cosine_distance", p, p).item() == pytest.approx(0.0, abs=1e-12)
        assert feat_dist_loss("cosine_similarity", p, p).item() == pytest.approx(1.0)


def test_dist_gradient_flows_into_both_branches():
    a = Tensor(np.random.default_rng(3).normal(size=(3, 5)), requires_grad=True)
    b = Tensor(np.random.default_rng(4).normal(size=(3, 5)), requires_grad=True)
    with Tape():
        loss = feat_dist_loss("cosine_similarity", a, b)
    backward(loss)
    assert np.abs(a.grad).sum() > 0
    assert np.abs(b.grad).sum() > 0


def test_pseudo_labels():
    labels = make_pseudo_labels(np.log(np.array([[0.97, 0.02, 0.01], [0.1, 0.2, 0.7]])))
    assert labels[0].label == 0
    assert labels[0].confidence == pytest.approx(0.97)
    assert labels[1].label == 2
    np.testing.assert_array_equal(labels[1].one_hot, [0, 0, 1])


def test_pseudo_label_loss_with_uniform_strong_is_log_c():
    weak = Tensor([[0.0, 0.0, 5.0]])
    strong = Tensor(np.zeros((1, 3)))
    loss, pseudo = pseudo_label_loss(weak, strong)
    assert loss.item() == pytest.approx(math.log(3), rel=1e-6)
    assert pseudo[0].label == 2
    with pytest.raises(LossInputError):
        pseudo_label_loss(weak, Tensor(np.zeros((1, 4))))


def test_no_gradient_reaches_weak_logits():
    weak = _bundle(np.array([[20.0, 0.0, 0.0], [0.0, 9.0, 0.0]]), requires_grad=True)
    strong = _bundle(np.random.default_rng(5).normal(size=(2, 3)), requires_grad=True)
    with Tape():
        terms = unlabeled_loss(weak, strong, tau=0.5)
    backward(terms.total)
    assert weak.logits.grad is None
    assert strong.logits.grad is not None


def test_empty_mask_gives_exact_zero():
    weak = _bundle(np.zeros((4, 3)))
    strong = _bundle(np.random.default_rng(6).normal(size=(4, 3)),
                     proj=np.random.default_rng(7).normal(size=(4, 4)))
    terms = unlabeled_loss(weak, strong, tau=0.95, metric="cosine_similarity")
    assert terms.total.item() == 0.0
    assert terms.pseudo.item() == 0.0
    assert terms.dist.item() == 0.0
    assert not terms.mask.any()


def test_loss_is_divided_by_batch_size():
    weak_logits = np.zeros((4, 3))
    weak_logits[0, 0] = 20.0
    strong_logits = np.random.default_rng(8).normal(size=(4, 3)).astype(np.float32)
    terms = unlabeled_loss(_bundle(weak_logits), _bundle(strong_logits), tau=0.95)
    row = strong_logits[0].astype(np.float64)
    ce = -(row[0] - row.max() - np.log(np.exp(row - row.max()).sum()))
    assert terms.mask.tolist() == [True, False, False, False]
    assert terms.total.item() == pytest.approx(ce / 4, rel=1e-5)


def test_masked_samples_do_not_affect_loss():
    rng = np.random.default_rng(9)
    weak_logits = np.zeros((4, 3))
    weak_logits[1, 2] = 20.0
    weak = _bundle(weak_logits, proj=rng.normal(size=(4, 4)))
    strong_logits, strong_proj = rng.normal(size=(4, 3)), rng.normal(size=(4, 4))
    base = unlabeled_loss(weak, _bundle(strong_logits, strong_proj), 0.95, "cosine_similarity").total.item()

    strong_logits[[0, 2, 3]] = rng.normal(size=(3, 3)) * 10
    strong_proj[[0, 2, 3]] = rng.normal(size=(3, 4))
    changed = unlabeled_loss(weak, _bundle(strong_logits, strong_proj), 0.95, "cosine_similarity").total.item()
    assert base == changed


def test_zero_projection_on_masked_sample_is_ignored():
    with precision(np.float64):
        weak_logits = np.array([[10.0, 0.0], [0.0, 0.0]])
        strong_logits = np.array([[0.3, -0.2], [1.0, 2.0]])
        weak_proj = np.array([[1.0, 2.0, 0.5], [0.3, 0.1, 0.2]])
        strong_proj = np.array([[0.5, -1.0, 2.0], [0.0, 0.0, 0.0]])
        weak = _bundle(weak_logits, proj=weak_proj)
        strong = _bundle(strong_logits, proj=strong_proj, requires_grad=True)
        with Tape():
            terms = unlabeled_loss(weak, strong, 0.95, "cosine_similarity")
        backward(terms.total)

        alone = unlabeled_loss(_bundle(weak_logits[:1], proj=weak_proj[:1]),
                               _bundle(strong_logits[:1], proj=strong_proj[:1]), 0.95, "cosine_similarity")
        strong_proj[1] = np.nan
        nan_terms = unlabeled_loss(weak, _bundle(strong_logits, proj=strong_proj), 0.95, "cosine_similarity")
    assert terms.mask.tolist() == [True, False]
    assert terms.total.item() == pytest.approx(alone.total.item() / 2, rel=1e-12)
    assert nan_terms.total.item() == terms.total.item()
    np.testing.assert_array_equal(strong.proj.grad[1], np.zeros(3))
    np.testing.assert_array_equal(strong.logits.grad[1], np.zeros(2))


def test_detach_weak_stops_dist_gradient():
    rng = np.random.default_rng(10)
    logits = np.zeros((2, 3))
    logits[:, 0] = 20.0
    for detach, expect_grad in ((False, True), (True, False)):
        weak = _bundle(logits, proj=rng.normal(size=(2, 4)), requires_grad=True)
        strong = _bundle(logits, proj=rng.normal(size=(2, 4)), requires_grad=True)
        with Tape():
            terms = unlabeled_loss(weak, strong, 0.95, "cosine_similarity", detach_weak=detach)
        backward(terms.total)
        assert (weak.proj.grad is not None) == expect_grad
        assert strong.proj.grad is not None


def test_invalid_tau():
    bundle = _bundle(np.zeros((1, 3)))
    for tau in (0.0, 1.0, 1.5):
        with pytest.raises(LossInputError):
            unlabeled_loss(bundle, bundle, tau)


def test_supervised_loss_values():
    assert supervised_loss([3], Tensor(np.zeros((1, 10)))).item() == pytest.approx(math.log(10), rel=1e-6)
    assert supervised_loss([0], Tensor([[1.0, 0.0]])).item() == pytest.approx(0.3133, abs=1e-4)
    with pytest.raises(LossInputError):
        supervised_loss([2], Tensor([[1.0, 0.0]]))
    with pytest.raises(LossInputError):
        supervised_loss([0, 1], Tensor([[1.0, 0.0]]))


def test_rotation_loss_is_mean_over_rows():
    logits = np.random.default_rng(11).normal(size=(8, 4))
    targets = [0, 1, 2, 3, 0, 1, 2, 3]
    with precision(np.float64):
        value = rotation_loss(Tensor(logits), targets).item()
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    assert value == pytest.approx(-log_probs[np.arange(8), targets].mean(), rel=1e-10)
    assert rotation_loss(Tensor(np.zeros((4, 4))), [0, 1, 2, 3]).item() == pytest.approx(math.log(4), rel=1e-6)
    with pytest.raises(LossInputError):
        rotation_loss(Tensor(np.zeros((1, 4))), [4])
    with pytest.raises(LossInputError):
        rotation_loss(Tensor(np.zeros((1, 3))), [0])


def test_total_objective():
    parts = Tensor(1.0), Tensor(2.0), Tensor(3.0)
    assert total_objective(*parts).item() == pytest.approx(6.0)
    assert total_objective(*parts, lambda_u=0.0, lambda_r=0.0).item() == pytest.approx(1.0)
    assert total_objective(parts[0], None, parts[2], lambda_u=1.0, lambda_r=0.5).item() == pytest.approx(2.5)
    with pytest.raises(LossInputError):
        total_objective(*parts, lambda_u=-1.0)


def test_weak_logit_perturbation_leaves_loss_unchanged():
    rng = np.random.default_rng(12)
    weak_logits = rng.normal(size=(4, 3)) * 0.1
    weak_logits[:2, 0] = 20.0
    strong = _bundle(rng.normal(size=(4, 3)), proj=rng.normal(size=(4, 4)))
    base = unlabeled_loss(_bundle(weak_logits), strong, 0.95).total.item()
    for i in range(4):
        for j in range(3):
            nudged = weak_logits.copy()
            nudged[i, j] += 1e-4
            assert unlabeled_loss(_bundle(nudged), strong, 0.95).total.item() == base
