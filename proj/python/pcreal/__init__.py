from ._core import (
    Model,
    RangeImage,
    ScanPattern,
    add_range_noise,
    adversary_lower_bound,
    bilinear_upsample,
    chamfer,
    default_config,
    farthest_point_sampling,
    gen_geometric_set,
    gen_misc,
    gen_real_surrogate,
    inject_patch_anomaly,
    knn,
    load_cloud,
    load_model,
    masked_error,
    project,
    save_xyz,
    train_run,
    unproject,
)

__all__ = [
    "Model",
    "RangeImage",
    "ScanPattern",
    "add_range_noise",
    "adversary_lower_bound",
    "bilinear_upsample",
    "chamfer",
    "default_config",
    "farthest_point_sampling",
    "gen_geometric_set",
    "gen_misc",
    "gen_real_surrogate",
    "inject_patch_anomaly",
    "knn",
    "load_cloud",
    "load_model",
    "masked_error",
    "project",
    "save_xyz",
    "train_run",
    "unproject",
]
