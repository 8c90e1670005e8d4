from probe.linear_probe import LinearProbe, ProbeError, fit_linear_probe
from probe.export import FEAT_MAGIC, export_features, extract_features, read_features, write_features
from probe.equivariance import (
    PROBE_TRANSFORMS,
    ProbeConfig,
    append_probe_result,
    build_probe_set,
    equivariance_probe,
)
from probe.feature_stats import PAIRS, DistanceStats, cosine_distances, feature_distance_stats

__all__ = [
    "LinearProbe",
    "ProbeError",
    "fit_linear_probe",
    "FEAT_MAGIC",
    "export_features",
    "extract_features",
    "read_features",
    "write_features",
    "PROBE_TRANSFORMS",
    "ProbeConfig",
    "append_probe_result",
    "build_probe_set",
    "equivariance_probe",
    "PAIRS",
    "DistanceStats",
    "cosine_distances",
    "feature_distance_stats",
]
