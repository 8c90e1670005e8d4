from losses.metrics import (
    METRICS,
    LN2,
    DistanceMetric,
    MetricError,
    feat_dist_loss,
    get_metric,
    js_divergence_dist,
    metric_eval,
    metric_per_sample,
)
from losses.objectives import (
    LossInputError,
    PseudoLabel,
    UnlabeledTerms,
    cross_entropy_per_sample,
    make_pseudo_labels,
    pseudo_label_loss,
    rotation_loss,
    supervised_loss,
    total_objective,
    unlabeled_loss,
)

__all__ = [
    "METRICS",
    "LN2",
    "DistanceMetric",
    "MetricError",
    "feat_dist_loss",
    "get_metric",
    "js_divergence_dist",
    "metric_eval",
    "metric_per_sample",
    "LossInputError",
    "PseudoLabel",
    "UnlabeledTerms",
    "cross_entropy_per_sample",
    "make_pseudo_labels",
    "pseudo_label_loss",
    "rotation_loss",
    "supervised_loss",
    "total_objective",
    "unlabeled_loss",
]
