"""Automatic annotation of the frames between two agreeing keyframes.

Each interior frame receives the prediction propagated from the left bound,
but only when its confident audio tags contain every sound label of the left
annotation; frames failing that gate are marked ``skipped_audio_gate`` and
surface in review with a warning instead of silently staying empty.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .matching import predict_annotation
from .model import FrameStatus, MatchPolicy, SoundingAnnotation

if TYPE_CHECKING:
    from .scheduler import SessionState
    from .store import Project


def populate(
    state: "SessionState",
    left: int,
    right: int,
    project: "Project",
    policy: MatchPolicy,
) -> list[tuple[int, SoundingAnnotation]]:
    """Fill frames strictly between ``left`` and ``right`` with predictions.

    Both bounds must already hold human annotations and the prediction from
    ``left`` must have been confirmed equal to ``right``'s. Human-reviewed
    frames inside the range are never touched. Returns the (frame, annotation)
    pairs actually recorded.
    """
    if left >= right:
        raise ValueError(f"populate requires left < right, got ({left}, {right})")
    for bound in (left, right):
        if state.status[bound] != FrameStatus.HUMAN:
            raise ValueError(f"populate bound {bound} is not human-annotated")

    required_labels = state.annotations[left].sound_labels
    recorded: list[tuple[int, SoundingAnnotation]] = []
    for i in range(left + 1, right):
        if state.status[i] in (FrameStatus.HUMAN, FrameStatus.AUTO_MODIFIED):
            continue
        frame = project.frames[i]
        if required_labels <= frame.confident_tags(policy.tag_threshold):
            prediction = predict_annotation(state.annotations[left], left, frame, policy)
            state.annotations[i] = prediction
            state.status[i] = FrameStatus.AUTO
            recorded.append((i, prediction))
        else:
            state.annotations.pop(i, None)
            state.status[i] = FrameStatus.SKIPPED_AUDIO_GATE
    return recorded
