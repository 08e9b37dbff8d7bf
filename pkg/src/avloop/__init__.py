"""avloop: human-in-the-loop annotation of sounding objects in video.

The package centers on a deterministic annotation engine: an audio-visual
binary search chooses which frames a person must label, box propagation
fills the frames in between, and an audio gate skips frames whose soundtrack
stopped matching. A REST service, a CLI, a synthetic-clip generator, and a
scripted annotator wrap the same engine.
"""

from .model import (
    AnnotationItem,
    AudioTag,
    BoundingBox,
    DetectedObject,
    FrameRecord,
    FrameStatus,
    MatchPolicy,
    Provenance,
    SoundingAnnotation,
    annotation_equal,
    iou,
    overlap_area,
)
from .scheduler import SchedulerDecision, SessionEngine, SessionState

__version__ = "0.1.0"

__all__ = [
    "AnnotationItem",
    "AudioTag",
    "BoundingBox",
    "DetectedObject",
    "FrameRecord",
    "FrameStatus",
    "MatchPolicy",
    "Provenance",
    "SchedulerDecision",
    "SessionEngine",
    "SessionState",
    "SoundingAnnotation",
    "annotation_equal",
    "iou",
    "overlap_area",
    "__version__",
]
