"""Significant-change detection between two frames.

A target frame differs visually from a source frame when the detection count
changes or some source box loses its correspondence; it differs auditorily
when the confident tag sets diverge, or when the target's tagger output is
too uncertain to trust (which deliberately summons the human).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .matching import condition1_holds
from .model import FrameRecord, MatchPolicy

REASON_OBJECT_COUNT = "object-count"
REASON_LOST_CORRESPONDENCE = "lost-correspondence"
REASON_TAG_SET_DELTA = "tag-set-delta"
REASON_LOW_CONFIDENCE = "low-confidence"


@dataclass(frozen=True)
class ChangeReport:
    visual_changed: bool
    auditory_changed: bool
    reasons: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if bool(self.reasons) != (self.visual_changed or self.auditory_changed):
            raise ValueError("reasons must be non-empty exactly when a change is flagged")

    @property
    def changed(self) -> bool:
        return self.visual_changed or self.auditory_changed


def _visual_reasons(src: FrameRecord, target: FrameRecord, policy: MatchPolicy) -> list[str]:
    reasons = []
    if len(src.detections) != len(target.detections):
        reasons.append(REASON_OBJECT_COUNT)
    for det in src.detections:
        if not any(
            condition1_holds(det.box, cand.box, src.index, target.index, policy)
            for cand in target.detections
        ):
            reasons.append(REASON_LOST_CORRESPONDENCE)
            break
    return reasons


def _auditory_reasons(src: FrameRecord, target: FrameRecord, policy: MatchPolicy) -> list[str]:
    reasons = []
    tau = policy.tag_threshold
    if src.confident_tags(tau) != target.confident_tags(tau):
        reasons.append(REASON_TAG_SET_DELTA)
    best = max((t.confidence for t in target.audio_tags), default=0.0)
    if best < tau:
        reasons.append(REASON_LOW_CONFIDENCE)
    return reasons


def _check_order(src: FrameRecord, target: FrameRecord) -> None:
    if target.index <= src.index:
        raise ValueError(f"target frame {target.index} must follow source frame {src.index}")


def visual_change(src: FrameRecord, target: FrameRecord, policy: MatchPolicy) -> bool:
    _check_order(src, target)
    return bool(_visual_reasons(src, target, policy))


def auditory_change(src: FrameRecord, target: FrameRecord, policy: MatchPolicy) -> bool:
    _check_order(src, target)
    return bool(_auditory_reasons(src, target, policy))


def audio_visual_change(src: FrameRecord, target: FrameRecord, policy: MatchPolicy) -> ChangeReport:
    _check_order(src, target)
    visual = _visual_reasons(src, target, policy)
    auditory = _auditory_reasons(src, target, policy)
    return ChangeReport(
        visual_changed=bool(visual),
        auditory_changed=bool(auditory),
        reasons=tuple(visual + auditory),
    )
