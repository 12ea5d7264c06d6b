"""mespot: a micro-expression spotting benchmark toolkit.

Baseline spotters (appearance, motion and landmark based, plus a supervised
spatiotemporal-feature classifier), the interval/center evaluation protocol
with cumulative leave-one-subject-out aggregation, DET analysis, and a
deterministic synthetic fixture generator for end-to-end testing.
"""

from .version import VERSION as __version__

from .errors import (
    ConfigurationError,
    CoverageError,
    GeometryError,
    MespotError,
    ParseError,
    SequenceTooShortError,
    TrainingError,
    UndefinedMetricError,
    ValidationError,
)
from .model import (
    DEFAULT_TEMPLATE,
    AlignmentTemplate,
    DatasetManifest,
    DatasetStats,
    Detection,
    FrameSequence,
    GroundTruthSample,
    LandmarkTrack,
    VideoRecord,
    center_length_to_interval,
    interval_to_center_length,
)
from .metrics import (
    DetPoint,
    EvalConfig,
    EvalCounts,
    MatchResult,
    det_points,
    frame_accuracy,
    iou,
    match,
    prf1,
)
from .align import align_frames, estimate_similarity
from .spotters import (
    ScoreCurve,
    SpotterConfig,
    chi2_contrast_curve,
    feature_engineering_apex,
    landmark_deviation_curve,
    lbp_block_histograms,
    mdmd_curve,
    nms,
    spot_landmarks,
    spot_lbp_chi2,
    spot_mdmd,
    threshold_peaks,
)
from .stfeatures import (
    LinearModel,
    StFeatureConfig,
    TrainConfig,
    extract_st_feature,
    load_model,
    save_model,
    spot_supervised,
    train_linear,
)
from .harness import (
    BenchmarkReport,
    FoldSplit,
    SpotterSpec,
    loso_folds,
    render_report,
    run_benchmark,
)
from .synth import FixtureConfig, generate_fixture, generate_video
