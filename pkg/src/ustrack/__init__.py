"""Semi-automated point tracking for B-mode ultrasound image sequences."""

from .annotstore import (
    AnnotationLayer,
    AnnotationStore,
    copy_range,
    export_csv,
    guess,
    import_csv,
    interpolate_gaps,
    load_layer,
    save_layer,
    trim,
)
from .errors import (
    ContractError,
    GeometryError,
    LoadError,
    NotFoundError,
    ParseError,
    SchemaVersionError,
    StructuralError,
    UstrackError,
    ValidationError,
)
from .evalkit import Spectrum, band_filter, jitter_metric, psd, rmse
from .flow import TrackConfig, TrackedPoint, TrackSegment, lk_step, pyr_track, track_range
from .geometry import (
    FascicleModel,
    MetricSeries,
    area_series,
    deformation_series,
    distance_series,
    fascicle_metrics,
    fascicle_series,
    line_intersection,
)
from .jitterfilter import (
    FilterConfig,
    FilteredTrajectory,
    coverage_count,
    filter_layer,
    filter_trajectory,
)
from .media import (
    Calibration,
    Frame,
    FrameSequence,
    Pyramid,
    build_pyramid,
    gradient,
    open_sequence,
    sample_bilinear,
)
from .rstc import RstcConfig, Tracklet, rstc_tracklet, sigmoid_weights
from .synthgen import (
    Composed,
    MotionField,
    Shear,
    Sinusoid,
    SynthSpec,
    Translation,
    make_speckle,
    render_sequence,
)

__version__ = "0.1.0"
