"""Box correspondence across frames and annotation prediction.

The correspondence test uses a distance-decaying overlap threshold: two boxes
in frames ``d`` apart correspond when their overlap exceeds
``(alpha - d * beta) * area(src)``, which tolerates accumulated drift of a
moving sound source. Prediction projects a prior frame's annotation onto a
target frame's detections, carrying the source geometry forward when nothing
corresponds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    AnnotationItem,
    BoundingBox,
    FrameRecord,
    MatchPolicy,
    Provenance,
    SoundingAnnotation,
    overlap_area,
)

__all__ = [
    "Correspondence",
    "overlap_area",
    "condition1_holds",
    "match_score",
    "predict_annotation",
]


@dataclass(frozen=True)
class Correspondence:
    """Where a source item landed in the target frame.

    Exactly one of ``matched_id``/``carried_box`` is set: either the item
    snapped onto a target detection, or its source geometry was copied over.
    """

    src_item: AnnotationItem
    matched_id: int | None
    carried_box: BoundingBox | None
    score: float

    def __post_init__(self) -> None:
        if (self.matched_id is None) == (self.carried_box is None):
            raise ValueError("exactly one of matched_id/carried_box must be set")


def condition1_holds(
    a: BoundingBox,
    b: BoundingBox,
    index_src: int,
    index_target: int,
    policy: MatchPolicy,
) -> bool:
    """Does ``b`` (in the target frame) correspond to ``a`` (in the source frame)?

    True iff overlap(b, a) > (alpha - (index_target - index_src) * beta) * area(a).
    Once the bracket drops to zero or below, any positive overlap counts.
    """
    if index_target <= index_src:
        raise ValueError(
            f"target index must follow source index, got {index_src} -> {index_target}"
        )
    distance = index_target - index_src
    threshold = (policy.alpha - distance * policy.beta) * a.area
    overlap = overlap_area(b, a)
    if threshold <= 0:
        return overlap > 0
    return overlap > threshold


def match_score(a: BoundingBox, b: BoundingBox) -> float:
    """Candidate ranking score: center distance plus size delta. Lower is better."""
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by) + abs(a.w - b.w) + abs(a.h - b.h)


def _correspond(
    src_box: BoundingBox,
    candidates: list,
    src_index: int,
    target_index: int,
    policy: MatchPolicy,
) -> tuple[int | None, float]:
    """Best-scoring candidate detection satisfying the correspondence test."""
    best_id: int | None = None
    best_score = math.inf
    for det in candidates:
        if not condition1_holds(src_box, det.box, src_index, target_index, policy):
            continue
        score = match_score(src_box, det.box)
        if score < best_score or (score == best_score and (best_id is None or det.id < best_id)):
            best_id = det.id
            best_score = score
    return best_id, best_score


def predict_annotation(
    src: SoundingAnnotation,
    src_index: int,
    target_frame: FrameRecord,
    policy: MatchPolicy,
) -> SoundingAnnotation:
    """Project ``src`` onto the target frame's detections.

    Each source item takes the best-scoring unclaimed detection that satisfies
    the correspondence test (ties broken by lowest detection id); with no
    correspondent, the source geometry is carried over unchanged. Output items
    always carry ``auto`` provenance and preserve the source item count, except
    that two carried items collapsing onto identical geometry keep only the
    first in canonical order (the target-uniqueness rule wins).
    """
    if target_frame.index <= src_index:
        raise ValueError(
            f"target frame {target_frame.index} must follow source frame {src_index}"
        )
    claimed: set[int] = set()
    used_keys: set[tuple] = set()
    predicted: list[AnnotationItem] = []
    for item in sorted(src.items, key=AnnotationItem.sort_key):
        candidates = [d for d in target_frame.detections if d.id not in claimed]
        matched_id, _ = _correspond(item.box, candidates, src_index, target_frame.index, policy)
        if matched_id is not None:
            claimed.add(matched_id)
            out = AnnotationItem(
                box=target_frame.detection(matched_id).box,
                sound_label=item.sound_label,
                provenance=Provenance.AUTO,
                detection_id=matched_id,
            )
        else:
            out = AnnotationItem(
                box=item.box,
                sound_label=item.sound_label,
                provenance=Provenance.AUTO,
                detection_id=None,
            )
        if out.target_key() in used_keys:
            continue
        used_keys.add(out.target_key())
        predicted.append(out)
    return SoundingAnnotation(target_frame.index, tuple(predicted))
