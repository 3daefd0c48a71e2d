"""Exception hierarchy for the correction pipeline."""


class ChromaFixError(Exception):
    """Base class for all library errors."""


class ImageFormatError(ChromaFixError):
    """File is not a decodable PNG/PPM or has invalid dimensions."""


class ImageSizeError(ChromaFixError):
    """Image too small for the requested window, or dimension mismatch."""


class WindowBoundsError(ChromaFixError):
    """A shifted evaluation window falls outside the image."""


class InsufficientSamplesError(ChromaFixError):
    """Fewer than two samples supplied to a covariance computation."""


class ConfigError(ChromaFixError):
    """Invalid or unparseable pipeline configuration."""


class PipelineError(ChromaFixError):
    """A pipeline stage failed; `stage` names the stage for diagnostics."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class InsufficientKeypointsError(PipelineError):
    """Fewer than two usable keypoint candidates."""


class InsufficientMatchesError(PipelineError):
    """Fewer than two disparity matches survived (search or pruning)."""


class InsufficientPointsError(PipelineError):
    """Fewer than two point pairs supplied to the transform fit."""


class DegenerateNeighbourhoodError(PipelineError):
    """Every candidate disparity gave an undefined L (constant windows)."""


class DegenerateFitError(PipelineError):
    """Transform fit produced a singular system or non-positive scale."""
