"""Sparse block precision-matrix estimation for multi-attribute Gaussian graphical models."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BlockPrecision,
    Dataset,
    EdgeGraph,
    NodePartition,
    center_columns,
    residual_sigma_estimate,
    unvectorize_block,
    vectorize_block,
)
from .objective import (  # noqa: E402
    ObjectiveValue,
    block_gradient,
    group_penalty,
    objective,
    sigma_gradient,
    smooth_loss,
)
from .optimizer import (  # noqa: E402
    FitConfig,
    FitResult,
    KktReport,
    block_prox_step,
    fit,
    group_soft_threshold,
    kkt_certificate,
    sigma_update,
)
from .modelsel import (  # noqa: E402
    CvConfig,
    LambdaGrid,
    cross_validate,
    lambda_max,
    regularization_path,
    univariate_view,
)
from .metrics import (  # noqa: E402
    ConfusionCounts,
    aggregate_univariate_blocks,
    confusion,
    scores,
)
from .synth import GeneratorConfig, GroundTruth, generate_truth, sample  # noqa: E402
