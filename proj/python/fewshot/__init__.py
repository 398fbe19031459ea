"""Few-shot classification evaluation engine (NCM and soft K-means over feature banks)."""

from ._core import (
    FeatureBank,
    FewshotError,
    ImbalanceSpec,
    Mode,
    PipelineConfig,
    SyntheticSpec,
    average_views,
    center,
    class_means,
    concat_features,
    evaluate,
    generate_bank,
    load_feature_bank,
    method_name,
    ncm_barycenters,
    ncm_predict,
    oracle_accuracy,
    project_hypersphere,
    run_cli,
    sample_task,
    soft_kmeans,
    soft_weights,
    sweep,
    validate_bank,
    write_feature_bank,
)

__all__ = [name for name in dir() if not name.startswith("_")]
