"""Segment-level reliability rating for semantic segmentation.

Aggregates pixel-wise softmax dispersion (normalized entropy and
probability difference) over predicted segments, scores segments against
ground truth with an adjusted IoU, and fits meta-models that detect false
positive segments and predict the segment-wise score.
"""

__version__ = "0.1.0"

from .components import Decomposition, decompose
from .dispersion import all_maps, diff_map, entropy_map, predict_classes
from .evaluation import (
    ExperimentReport,
    SplitPlan,
    accuracy,
    auroc,
    correlation_table,
    dice,
    naive_baseline,
    pearson,
    r_squared,
    residual_sigma,
    run_experiment,
)
from .io import SegmentRecord, load_label_map, load_tensor, save_label_map, save_tensor
from .regression import (
    LassoPath,
    MetaModel,
    Standardizer,
    default_grid,
    fit_lasso_logistic,
    fit_linear,
    lambda_max,
    lasso_path,
    refit_unpenalized,
)
from .segmetrics import build_dataset, image_records, overlap_scores
from .synth import SceneSpec, SyntheticScene, generate_corpus, generate_scene
