"""Single-image lateral chromatic aberration correction via keypoint alignment."""

from .collinearity import (
    LMap,
    accumulate_covariance,
    eigenvalues_sym3,
    l_at,
    l_map,
    l_value,
    lmap_to_image,
)
from .config import PipelineConfig, load_config, save_config, validate
from .disparity import DisparityMatch, SearchConfig, match_all, search_match
from .errors import (
    ChromaFixError,
    ConfigError,
    DegenerateFitError,
    DegenerateNeighbourhoodError,
    ImageFormatError,
    ImageSizeError,
    InsufficientKeypointsError,
    InsufficientMatchesError,
    InsufficientPointsError,
    InsufficientSamplesError,
    PipelineError,
    WindowBoundsError,
)
from .image import (
    ChannelId,
    RgbImage,
    gradient_magnitude,
    load_image,
    sample_bilinear,
    saturation_mask,
    save_image,
)
from .keypoints import Keypoint, KeypointConfig, candidate_mask, select_keypoints
from .syntheval import (
    AberrationSpec,
    EvalReport,
    default_sweep,
    evaluate_case,
    make_test_image,
    mean_l,
    psnr,
    synthesize_aberration,
    write_sweep_csv,
)
from .transform import (
    FitReport,
    PointPair,
    SimilarityTransform,
    fit_channels,
    fit_similarity,
    prune_matches,
)
from .warp import CorrectionResult, correct_image, warp_channel

__version__ = "0.1.0"
