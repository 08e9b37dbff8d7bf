"""Keyframe scheduling: audio-visual-sensitive binary search.

After every human annotation the engine either confirms continuity with the
left bound and unwinds the right-bound stack (interpolating agreed segments),
or descends by binary search toward the first discontinuity. With the stack
drained it scans forward from the farthest human frame for the next
audio-visual change, jumping at most ``k`` frames at a time.

One deliberate deviation from the published pseudocode: a right bound popped
for comparison goes back on the stack when the comparison fails (the prose's
"remove it if the similarity holds"). Dropping it would silently abandon the
unresolved segment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .changes import audio_visual_change
from .matching import predict_annotation
from .model import (
    FrameStatus,
    MatchPolicy,
    Provenance,
    SoundingAnnotation,
    annotation_equal,
)
from .propagation import populate

if TYPE_CHECKING:
    from .store import Project

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchedulerDecision:
    """What the engine wants next: a frame to annotate, or nothing (done).

    ``populated`` lists the (left, right) segments auto-filled by this step.
    """

    frame: int | None
    populated: tuple[tuple[int, int], ...] = ()

    @property
    def done(self) -> bool:
        return self.frame is None

    def to_json(self) -> dict:
        return {
            "kind": "done" if self.done else "annotate_frame",
            "frame": self.frame,
            "populated": [list(r) for r in self.populated],
        }


@dataclass
class SessionState:
    """The scheduler's mutable world for one annotation session."""

    n_frames: int
    status: list[FrameStatus] = field(default_factory=list)
    annotations: dict[int, SoundingAnnotation] = field(default_factory=dict)
    right_bound_stack: list[int] = field(default_factory=list)  # top = last element
    left_bound: int = 0
    current: int | None = None
    pending: int | None = 0  # frame the scheduler is waiting on; None once done

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError("session needs at least one frame")
        if not self.status:
            self.status = [FrameStatus.UNANNOTATED] * self.n_frames

    @property
    def farthest_human(self) -> int | None:
        human = [i for i, s in enumerate(self.status) if s == FrameStatus.HUMAN]
        return max(human) if human else None

    def nearest_human_below(self, frame: int) -> int | None:
        for i in range(frame - 1, -1, -1):
            if self.status[i] == FrameStatus.HUMAN:
                return i
        return None

    def all_settled(self) -> bool:
        return all(s.settled for s in self.status)

    def counts(self) -> dict[FrameStatus, int]:
        out = {s: 0 for s in FrameStatus}
        for s in self.status:
            out[s] += 1
        return out


class SessionEngine:
    """Binds a project, a policy, and one session's state; single writer."""

    def __init__(self, project: "Project", policy: MatchPolicy | None = None,
                 state: SessionState | None = None):
        self.project = project
        self.policy = policy or MatchPolicy()
        self.state = state or SessionState(n_frames=len(project.frames))

    # -- recording -----------------------------------------------------------

    def _check_range(self, frame: int) -> None:
        if not 0 <= frame < self.state.n_frames:
            raise IndexError(f"frame {frame} out of range 0..{self.state.n_frames - 1}")

    def record_human_annotation(self, frame: int, annotation: SoundingAnnotation) -> FrameStatus:
        """Store a user-submitted annotation and return the status it received.

        A scheduler-requested frame becomes ``human``; editing an auto frame
        out of band turns it into ``auto_modified``.
        """
        self._check_range(frame)
        if annotation.frame_index != frame:
            raise ValueError("annotation frame_index does not match target frame")
        prior = self.state.status[frame]
        if prior == FrameStatus.AUTO and frame != self.state.pending:
            new_status = FrameStatus.AUTO_MODIFIED
        elif prior == FrameStatus.AUTO_MODIFIED:
            new_status = FrameStatus.AUTO_MODIFIED
        else:
            new_status = FrameStatus.HUMAN
        provenance = (
            Provenance.AUTO_MODIFIED if new_status == FrameStatus.AUTO_MODIFIED
            else Provenance.HUMAN
        )
        self.state.annotations[frame] = annotation.with_provenance(provenance)
        self.state.status[frame] = new_status
        return new_status

    # -- Alg. 1: the decision after a human annotation ------------------------

    def on_human_annotation(self, frame: int, annotation: SoundingAnnotation) -> SchedulerDecision:
        """Record ``annotation`` at ``frame`` and decide the next keyframe."""
        new_status = self.record_human_annotation(frame, annotation)
        if new_status != FrameStatus.HUMAN:
            # Out-of-band correction of an auto frame: anchors are unchanged,
            # so the outstanding request stands.
            return SchedulerDecision(frame=self.state.pending)

        state = self.state
        state.current = frame
        left = state.nearest_human_below(frame)
        state.left_bound = left if left is not None else frame
        self._drop_stale_stack_entries(frame)

        populated: list[tuple[int, int]] = []
        if frame == 0 or left is None:
            matched = True
            if left is None and frame != 0:
                # Out-of-order first annotation: nothing to compare against,
                # park it on the stack and ask for the session anchor.
                state.right_bound_stack.append(frame)
                state.pending = 0
                return SchedulerDecision(frame=0)
        else:
            prediction = predict_annotation(
                state.annotations[left], left, self.project.frames[frame], self.policy
            )
            matched = annotation_equal(prediction, state.annotations[frame], self.policy)

        if matched:
            if left is not None and left < frame:
                self._populate(left, frame, populated)
            cur = frame
        else:
            mid = self._midpoint_target(left, frame)
            if mid is not None:
                state.right_bound_stack.append(frame)
                state.pending = mid
                return SchedulerDecision(frame=mid, populated=tuple(populated))
            # Adjacent discontinuity: nothing between left and frame to probe;
            # the segment is resolved with the change sitting at `frame`.
            cur = frame

        decision = self._unwind_stack(cur, populated)
        return decision

    def _drop_stale_stack_entries(self, frame: int) -> None:
        state = self.state
        state.right_bound_stack = [
            r for r in state.right_bound_stack
            if r > frame and state.status[r] == FrameStatus.HUMAN
        ]

    def _populate(self, left: int, right: int, populated: list[tuple[int, int]]) -> None:
        populate(self.state, left, right, self.project, self.policy)
        if right > left + 1:
            populated.append((left, right))

    def _unwind_stack(self, cur: int, populated: list[tuple[int, int]]) -> SchedulerDecision:
        """Pop agreed right bounds, interpolating; stop at the first mismatch."""
        state = self.state
        while state.right_bound_stack:
            top = state.right_bound_stack[-1]
            if top <= cur or state.status[top] != FrameStatus.HUMAN:
                state.right_bound_stack.pop()
                continue
            prediction = predict_annotation(
                state.annotations[cur], cur, self.project.frames[top], self.policy
            )
            if annotation_equal(prediction, state.annotations[top], self.policy):
                state.right_bound_stack.pop()
                self._populate(cur, top, populated)
                cur = top
            else:
                mid = self._midpoint_target(cur, top)
                if mid is None:
                    # No frame left to probe between cur and top: accept the
                    # discontinuity and keep unwinding from top.
                    state.right_bound_stack.pop()
                    cur = top
                    continue
                state.pending = mid
                return SchedulerDecision(frame=mid, populated=tuple(populated))
        return self._farthest_decision(populated)

    def _midpoint_target(self, left: int | None, right: int) -> int | None:
        """Floor midpoint of (left, right); nearest open frame if it's taken."""
        lo = -1 if left is None else left
        mid = (lo + right) // 2
        candidates = [
            i for i in range(lo + 1, right) if self.state.status[i] == FrameStatus.UNANNOTATED
        ]
        if not candidates:
            return None
        # Prefer the closest candidate to the floor midpoint, advancing on ties.
        return min(candidates, key=lambda i: (abs(i - mid), -i))

    # -- Alg. 3: farthest frame needing annotation ----------------------------

    def farthest_frame_needing_annotation(self) -> int | None:
        """First audio-visual change within k frames past the farthest human
        frame, else the k-th frame; None when the session is complete."""
        state = self.state
        hf = state.farthest_human
        if hf is None:
            return 0
        last = state.n_frames - 1
        if hf >= last:
            return self._first_unannotated()
        fallback = min(hf + self.policy.k, last)
        src = self.project.frames[hf]
        for i in range(1, self.policy.k + 1):
            idx = hf + i
            if idx > last:
                break
            if not audio_visual_change(src, self.project.frames[idx], self.policy).changed:
                continue
            if state.status[idx] in (FrameStatus.UNANNOTATED, FrameStatus.AUTO):
                return idx
        if state.status[fallback] in (FrameStatus.UNANNOTATED, FrameStatus.AUTO):
            return fallback
        return self._first_unannotated()

    def _first_unannotated(self) -> int | None:
        for i, s in enumerate(self.state.status):
            if s == FrameStatus.UNANNOTATED:
                return i
        return None

    def _farthest_decision(self, populated: list[tuple[int, int]]) -> SchedulerDecision:
        nxt = self.farthest_frame_needing_annotation()
        self.state.pending = nxt
        return SchedulerDecision(frame=nxt, populated=tuple(populated))

    # -- preemption of the immediate next frame -------------------------------

    def preempt_next(self) -> tuple[int, SoundingAnnotation]:
        """Predict the frame after the current one for user confirmation."""
        state = self.state
        if state.current is None:
            raise ValueError("no frame has been annotated yet")
        if state.current >= state.n_frames - 1:
            raise ValueError("end of video")
        target = state.current + 1
        prediction = predict_annotation(
            state.annotations[state.current], state.current,
            self.project.frames[target], self.policy,
        )
        return target, prediction

    def confirm_preempt(self, frame: int, annotation: SoundingAnnotation,
                        modified: bool = False) -> FrameStatus:
        """Record a user-reviewed preempted prediction as auto(-modified)."""
        self._check_range(frame)
        state = self.state
        if state.current is None or frame != state.current + 1:
            raise ValueError(f"frame {frame} is not the preempted next frame")
        if state.status[frame] in (FrameStatus.HUMAN, FrameStatus.AUTO_MODIFIED):
            raise ValueError(f"frame {frame} already holds human-reviewed work")
        provenance = Provenance.AUTO_MODIFIED if modified else Provenance.AUTO
        state.annotations[frame] = annotation.with_provenance(provenance)
        state.status[frame] = (
            FrameStatus.AUTO_MODIFIED if modified else FrameStatus.AUTO
        )
        state.current = frame
        return state.status[frame]
