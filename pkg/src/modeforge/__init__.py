"""DMD features from static images, with RKS and SVM classification."""

from .color_flow import (
    DEFAULT_ORDER,
    LabImage,
    SnapshotMatrix,
    build_snapshots,
    lab_to_rgb,
    read_image,
    rgb_to_lab,
)
from .dmd_core import (
    DmdResult,
    LowRankSparsePair,
    SvdFactors,
    dmd,
    lowrank_sparse_split,
    reconstruct,
    spectrum_rows,
    thin_svd,
)
from .feature_builder import (
    FeatureConfig,
    FeatureVector,
    average_pool,
    extract_feature,
    minmax_normalize,
    read_features,
    read_features_csv,
    read_features_dmdf,
    write_features_csv,
    write_features_dmdf,
)
from .rff_map import RffMap, median_bandwidth, sample_map, transform
from .classifiers import (
    LabeledSet,
    RksModel,
    SvmModel,
    decision_scores,
    evaluate,
    linear_objective,
    load_model,
    predict,
    predict_rks,
    rbf_kernel,
    save_model,
    train_rks,
    train_svm_linear,
    train_svm_rbf,
)
from .dataset import (
    Dataset,
    SplitSpec,
    TextureSpec,
    load_dir,
    split,
    synth_image,
    synth_preset,
    synth_textures,
)
from .harness_cli import ExperimentConfig, load_config, run_experiment

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ORDER",
    "Dataset",
    "DmdResult",
    "ExperimentConfig",
    "FeatureConfig",
    "FeatureVector",
    "LabImage",
    "LabeledSet",
    "LowRankSparsePair",
    "RffMap",
    "RksModel",
    "SnapshotMatrix",
    "SplitSpec",
    "SvdFactors",
    "SvmModel",
    "TextureSpec",
    "average_pool",
    "build_snapshots",
    "decision_scores",
    "dmd",
    "evaluate",
    "extract_feature",
    "lab_to_rgb",
    "linear_objective",
    "load_config",
    "load_dir",
    "load_model",
    "lowrank_sparse_split",
    "median_bandwidth",
    "minmax_normalize",
    "predict",
    "predict_rks",
    "rbf_kernel",
    "read_features",
    "read_features_csv",
    "read_features_dmdf",
    "read_image",
    "reconstruct",
    "rgb_to_lab",
    "run_experiment",
    "sample_map",
    "save_model",
    "spectrum_rows",
    "split",
    "synth_image",
    "synth_preset",
    "synth_textures",
    "thin_svd",
    "train_rks",
    "train_svm_linear",
    "train_svm_rbf",
    "transform",
    "write_features_csv",
    "write_features_dmdf",
]
