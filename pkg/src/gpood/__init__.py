"""GP-based out-of-distribution detection for classifier score vectors.

The package fits one GP per class to a classifier's unconstrained scores
over intermediate-layer features, scores test points by their average KL
divergence from held-out in-distribution posteriors, calibrates per-class
thresholds as empirical quantiles, and ships an executable form of the
detection bound relating threshold exceedance to feature-space separation.
"""

from .detector import (
    ClassValidation,
    DetectionResult,
    DetectorConfig,
    DetectorModel,
    calibrate_thresholds,
    detect,
    detect_batch,
    detection_score,
    fit_detector,
    kl_score_pair,
    load_model,
    save_model,
    threshold_from_scores,
)
from .errors import (
    DataFormatError,
    DimensionError,
    FitError,
    GpoodError,
    KernelConditionError,
)
from .gp import (
    ClassGP,
    PredictiveDistribution,
    fit_gp,
    predict,
    predict_many,
    profile_ll_gradient,
    profile_log_likelihood,
)
from .hyperfit import (
    OptDiagnostics,
    OptimizerConfig,
    init_lengthscales,
    optimize_lengthscales,
)
from .interchange import (
    Dataset,
    Sample,
    SplitPair,
    SynthConfig,
    load_dataset,
    save_dataset,
    split_per_class,
    synthesize,
)
from .kernel import (
    JitterPolicy,
    KernelMatrix,
    Lengthscales,
    cross_kernel,
    kernel_matrix,
    kernel_value,
    weighted_min_distance,
)
from .metrics import EvalReport, auroc_from_margins, evaluate, roc_curve
from .theory import (
    BoundReport,
    ClassBound,
    class_bounds,
    compute_a_k,
    min_eigenvalue,
    theorem_check,
)

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "ClassBound",
    "ClassGP",
    "ClassValidation",
    "DataFormatError",
    "Dataset",
    "DetectionResult",
    "DetectorConfig",
    "DetectorModel",
    "DimensionError",
    "EvalReport",
    "FitError",
    "GpoodError",
    "JitterPolicy",
    "KernelConditionError",
    "KernelMatrix",
    "Lengthscales",
    "OptDiagnostics",
    "OptimizerConfig",
    "PredictiveDistribution",
    "Sample",
    "SplitPair",
    "SynthConfig",
    "auroc_from_margins",
    "calibrate_thresholds",
    "class_bounds",
    "compute_a_k",
    "cross_kernel",
    "detect",
    "detect_batch",
    "detection_score",
    "evaluate",
    "fit_detector",
    "fit_gp",
    "init_lengthscales",
    "kernel_matrix",
    "kernel_value",
    "kl_score_pair",
    "load_dataset",
    "load_model",
    "min_eigenvalue",
    "optimize_lengthscales",
    "predict",
    "predict_many",
    "profile_ll_gradient",
    "profile_log_likelihood",
    "roc_curve",
    "save_dataset",
    "save_model",
    "split_per_class",
    "synthesize",
    "theorem_check",
    "threshold_from_scores",
    "weighted_min_distance",
]
