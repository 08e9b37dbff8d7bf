"""Domain types shared across the annotation engine.

Everything here is an immutable value type: construction validates, equality
is structural, and instances are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any


class Provenance(str, Enum):
    HUMAN = "human"
    AUTO = "auto"
    AUTO_MODIFIED = "auto_modified"


class FrameStatus(str, Enum):
    UNANNOTATED = "unannotated"
    HUMAN = "human"
    AUTO = "auto"
    AUTO_MODIFIED = "auto_modified"
    SKIPPED_AUDIO_GATE = "skipped_audio_gate"

    @property
    def settled(self) -> bool:
        """True once the frame holds any resolution, including a gate skip."""
        return self is not FrameStatus.UNANNOTATED


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned rectangle in pixel coordinates, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def clamped(self, frame_w: float, frame_h: float) -> "BoundingBox":
        """Clip to frame bounds; raises if nothing is left inside the frame."""
        x0 = max(self.x, 0.0)
        y0 = max(self.y, 0.0)
        x1 = min(self.x + self.w, float(frame_w))
        y1 = min(self.y + self.h, float(frame_h))
        if x1 <= x0 or y1 <= y0:
            raise ValueError(f"box {self} lies outside a {frame_w}x{frame_h} frame")
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)

    def to_json(self) -> dict[str, float]:
        # Emit true floats so exports are byte-stable even if a box was built
        # from ints (replayed logs always parse back as floats).
        return {"x": float(self.x), "y": float(self.y),
                "w": float(self.w), "h": float(self.h)}

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "BoundingBox":
        return BoundingBox(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"]))


def overlap_area(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area of two boxes in px^2 (0 when disjoint)."""
    dx = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    dy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if dx <= 0 or dy <= 0:
        return 0.0
    return dx * dy


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = overlap_area(a, b)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class DetectedObject:
    """One detector output: a box plus an object category and confidence."""

    id: int
    box: BoundingBox
    class_label: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class AudioTag:
    """Predicted sound category for one frame's one-second audio context."""

    label: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class FrameRecord:
    """One video frame: image reference, detections, and audio-tag predictions."""

    index: int
    timestamp_ms: int
    image_ref: str
    detections: tuple[DetectedObject, ...] = ()
    audio_tags: tuple[AudioTag, ...] = ()

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        ids = [d.id for d in self.detections]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate detection ids in frame {self.index}")
        labels = [t.label for t in self.audio_tags]
        if len(labels) != len(set(labels)):
            raise ValueError(f"duplicate audio-tag labels in frame {self.index}")

    def detection(self, det_id: int) -> DetectedObject:
        for d in self.detections:
            if d.id == det_id:
                return d
        raise KeyError(f"frame {self.index} has no detection id {det_id}")

    def confident_tags(self, threshold: float) -> frozenset[str]:
        return frozenset(t.label for t in self.audio_tags if t.confidence >= threshold)


@dataclass(frozen=True)
class AnnotationItem:
    """One sounding object in a frame: a target box plus the sound's label.

    ``detection_id`` is set when the annotator picked a detector candidate;
    ``box`` always holds the item's geometry (the detection's box, or the
    human-drawn rectangle for custom items).
    """

    box: BoundingBox
    sound_label: str
    provenance: Provenance = Provenance.HUMAN
    detection_id: int | None = None

    @property
    def is_custom(self) -> bool:
        return self.detection_id is None

    def target_key(self) -> tuple:
        """Identity of the annotated target, unique within one frame's items."""
        if self.detection_id is not None:
            return ("det", self.detection_id)
        return ("box", self.box.x, self.box.y, self.box.w, self.box.h)

    def sort_key(self) -> tuple:
        return (self.sound_label, self.target_key())

    def with_provenance(self, provenance: Provenance) -> "AnnotationItem":
        return replace(self, provenance=provenance)

    def to_json(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "box": self.box.to_json(),
            "sound_label": self.sound_label,
            "provenance": self.provenance.value,
        }
        if self.detection_id is not None:
            obj["detection_id"] = self.detection_id
        return obj

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "AnnotationItem":
        return AnnotationItem(
            box=BoundingBox.from_json(obj["box"]),
            sound_label=str(obj["sound_label"]),
            provenance=Provenance(obj.get("provenance", "human")),
            detection_id=obj.get("detection_id"),
        )


@dataclass(frozen=True)
class SoundingAnnotation:
    """Per-frame answer: the set of sounding objects (possibly empty = silent)."""

    frame_index: int
    items: tuple[AnnotationItem, ...] = ()

    def __post_init__(self) -> None:
        keys = [it.target_key() for it in self.items]
        if len(keys) != len(set(keys)):
            raise ValueError(f"duplicate annotation targets in frame {self.frame_index}")
        object.__setattr__(self, "items", tuple(sorted(self.items, key=AnnotationItem.sort_key)))

    @property
    def sound_labels(self) -> frozenset[str]:
        return frozenset(it.sound_label for it in self.items)

    def with_provenance(self, provenance: Provenance) -> "SoundingAnnotation":
        return SoundingAnnotation(
            self.frame_index, tuple(it.with_provenance(provenance) for it in self.items)
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "frame_index": self.frame_index,
            "items": [it.to_json() for it in self.items],
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "SoundingAnnotation":
        return SoundingAnnotation(
            frame_index=int(obj["frame_index"]),
            items=tuple(AnnotationItem.from_json(it) for it in obj.get("items", [])),
        )


@dataclass(frozen=True)
class MatchPolicy:
    """Constants governing box correspondence, audio gating, and scheduling.

    ``alpha``/``beta`` set the distance-decaying overlap threshold, ``k`` caps
    the forward scan for the next keyframe, ``tag_threshold`` is the audio-tag
    confidence cutoff, and ``same_frame_iou`` is the equality test between a
    human-drawn box and a detection within one frame.
    """

    alpha: float = 0.8
    beta: float = 0.05
    k: int = 10
    tag_threshold: float = 0.5
    same_frame_iou: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.tag_threshold < 1.0:
            raise ValueError("tag_threshold must be in (0, 1)")
        if not 0.0 < self.same_frame_iou <= 1.0:
            raise ValueError("same_frame_iou must be in (0, 1]")

    def to_json(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k": self.k,
            "tag_threshold": self.tag_threshold,
            "same_frame_iou": self.same_frame_iou,
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "MatchPolicy":
        return MatchPolicy(**{key: obj[key] for key in obj})


def _targets_match(a: AnnotationItem, b: AnnotationItem, policy: MatchPolicy) -> bool:
    if a.detection_id is not None and b.detection_id is not None:
        return a.detection_id == b.detection_id
    # At least one side is a human-drawn box: compare geometry.
    return iou(a.box, b.box) >= policy.same_frame_iou


def _items_match(a: AnnotationItem, b: AnnotationItem, policy: MatchPolicy) -> bool:
    return a.sound_label == b.sound_label and _targets_match(a, b, policy)


def annotation_equal(a: SoundingAnnotation, b: SoundingAnnotation, policy: MatchPolicy) -> bool:
    """True iff a bijection pairs up items with equal labels and matching targets.

    Detection-backed items match on id; a custom box matches anything whose
    geometry overlaps it with IoU >= ``policy.same_frame_iou``.
    """
    if len(a.items) != len(b.items):
        return False
    if not a.items:
        return True
    b_items = list(b.items)

    def assign(i: int, used: int) -> bool:
        if i == len(a.items):
            return True
        for j, cand in enumerate(b_items):
            if used & (1 << j):
                continue
            if _items_match(a.items[i], cand, policy):
                if assign(i + 1, used | (1 << j)):
                    return True
        return False

    return assign(0, 0)


def annotation_content_key(ann: SoundingAnnotation) -> tuple:
    """Geometry-and-label fingerprint, ignoring provenance and detection ids."""
    return tuple(
        sorted((it.sound_label, it.box.x, it.box.y, it.box.w, it.box.h) for it in ann.items)
    )
