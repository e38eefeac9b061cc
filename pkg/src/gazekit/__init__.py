"""gazekit: gaze-to-saliency analytics.

Fixation detection from raw gaze streams, duration-weighted Gaussian saliency
maps, attention-guided crop planning, keep-and-retrain feature-importance
curves, and saliency similarity metrics, with a CLI front-end (`gazekit`).
"""

from .core import (
    BoundsError,
    ConfigError,
    DatasetManifest,
    Fixation,
    FormatError,
    GazeKitError,
    GazeSample,
    Geometry,
    ImageRecord,
    ParseError,
    RasterImage,
    SaliencyMap,
    SchemaError,
    ShapeError,
    TrainingError,
)
from .fixation import IvtConfig, detect_fixations, pixels_to_degrees
from .render import RenderConfig, apply_attention, render_saliency, sigma_from_geometry
from .crops import (
    CropBox,
    CropPlan,
    WindowSpec,
    extract_and_resize,
    integral_image,
    iou,
    plan_crops,
    preset_windows,
    score_windows,
    select_topk,
)
from .kar import KarCurve, KeepMask, apply_mask, curve_auc, kar_run, keep_mask
from .toy_model import ToyClassifier, TrainConfig, evaluate, train_toy
from .metrics import (
    DistributionMap,
    FixationSet,
    compare_all,
    information_gain,
    kl_divergence,
    pearson_cc,
    rank_correlation,
    shuffled_auc,
    sim,
)
from .attributes import (
    ComparisonVector,
    HitRateReport,
    PartAttention,
    assign_fixations,
    comparison_vector,
    discriminative_part,
    hit_rate,
)

__version__ = "0.1.0"
