"""Scripted annotator for benchmarking the loop end to end.

Two drivers share one annotator brain: the in-process driver talks straight
to a :class:`~avloop.session.Session`, the HTTP driver goes through the REST
API. Given the same policy and seed they must produce identical exports —
there is a test pinning that.

The annotator answers each scheduler request from ground truth. In ``perfect``
mode it clicks the detection that coincides with the true box when one exists
and draws the box by hand otherwise. ``noisy`` mode adds Gaussian jitter to
hand-drawn boxes and occasionally clicks the wrong detection. ``manual`` mode
ignores the scheduler entirely and hand-draws every frame in order, which is
the no-assistance baseline.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Any, Sequence

from .model import (
    AnnotationItem,
    BoundingBox,
    DetectedObject,
    SoundingAnnotation,
    iou,
)
from .session import Session
from .store import Project

logger = logging.getLogger(__name__)

PICK_IOU = 0.9  # a detection this close to the true box counts as "the" object


@dataclass(frozen=True)
class SimPolicy:
    """How the scripted annotator behaves."""

    mode: str = "perfect"  # "perfect" | "noisy"
    box_jitter_px: float = 0.0
    wrong_pick_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("perfect", "noisy"):
            raise ValueError(f"unknown sim mode {self.mode!r}")
        if self.mode == "perfect" and (self.box_jitter_px or self.wrong_pick_prob):
            raise ValueError("perfect mode takes no noise parameters")

    @staticmethod
    def noisy(box_jitter_px: float = 2.0, wrong_pick_prob: float = 0.05,
              seed: int = 0) -> "SimPolicy":
        return SimPolicy("noisy", box_jitter_px, wrong_pick_prob, seed)


@dataclass(frozen=True)
class SimReport:
    session_id: str
    steps: int
    human_frames: int
    export: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "steps": self.steps,
            "human_frames": self.human_frames,
        }


class SimAnnotator:
    """Turns ground truth + frame detections into submitted annotations."""

    def __init__(self, ground_truth: dict[int, SoundingAnnotation], policy: SimPolicy):
        self.truth = ground_truth
        self.policy = policy
        self.rng = random.Random(policy.seed)

    def _jitter(self, box: BoundingBox) -> BoundingBox:
        sigma = self.policy.box_jitter_px
        dx, dy = self.rng.gauss(0, sigma), self.rng.gauss(0, sigma)
        dw, dh = self.rng.gauss(0, sigma), self.rng.gauss(0, sigma)
        if self.policy.mode == "perfect":
            return box
        return BoundingBox(
            x=max(0.0, box.x + dx),
            y=max(0.0, box.y + dy),
            w=max(1.0, box.w + dw),
            h=max(1.0, box.h + dh),
        )

    def annotation_for(self, frame_index: int,
                       detections: Sequence[DetectedObject],
                       hand_drawn_only: bool = False) -> SoundingAnnotation:
        truth = self.truth.get(frame_index) or SoundingAnnotation(frame_index=frame_index)
        dets = sorted(detections, key=lambda d: d.id)
        items: list[AnnotationItem] = []
        for gt_item in truth.items:
            if hand_drawn_only:
                items.append(AnnotationItem(box=self._jitter(gt_item.box),
                                            sound_label=gt_item.sound_label))
                continue
            match = next((d for d in dets if iou(d.box, gt_item.box) >= PICK_IOU), None)
            if match is not None:
                pick = match
                if self.policy.wrong_pick_prob and self.rng.random() < self.policy.wrong_pick_prob:
                    others = [d for d in dets if d.id != match.id]
                    if others:
                        pick = others[0]
                items.append(AnnotationItem(box=pick.box, sound_label=gt_item.sound_label,
                                            detection_id=pick.id))
            else:
                items.append(AnnotationItem(box=self._jitter(gt_item.box),
                                            sound_label=gt_item.sound_label))
        return SoundingAnnotation(frame_index=frame_index, items=tuple(items))


def _require_truth(project: Project) -> dict[int, SoundingAnnotation]:
    truth = project.ground_truth()
    if truth is None:
        raise ValueError(f"project {project.name} has no ground_truth.json to simulate from")
    return truth


def run_simulation(project: Project, policy: SimPolicy | None = None,
                   manual: bool = False, session_id: str | None = None,
                   max_steps: int | None = None) -> SimReport:
    """Drive a fresh session in-process until the scheduler is satisfied."""
    policy = policy or SimPolicy()
    annotator = SimAnnotator(_require_truth(project), policy)
    session = Session.create(project, session_id=session_id, actor="sim")
    n = session.state.n_frames
    limit = max_steps or (4 * n + 16)
    steps = 0

    if manual:
        for frame in range(n):
            ann = annotator.annotation_for(frame, (), hand_drawn_only=True)
            session.annotate(frame, ann)
            steps += 1
    else:
        while steps < limit:
            frame = session.pending_frame()
            if frame is None:
                break
            ann = annotator.annotation_for(frame, project.frames[frame].detections)
            session.annotate(frame, ann)
            steps += 1
        else:
            raise RuntimeError(f"simulation exceeded {limit} steps without finishing")

    human = sum(1 for s in session.state.status if s.value == "human")
    return SimReport(session_id=session.session_id, steps=steps,
                     human_frames=human, export=session.export())


def run_simulation_http(client, project_id: str, truth: dict[int, SoundingAnnotation],
                        policy: SimPolicy | None = None, manual: bool = False,
                        max_steps: int | None = None) -> SimReport:
    """Same loop as :func:`run_simulation` but through the REST API.

    ``client`` is anything with httpx's request interface (a real client or a
    test client). Detections for each request come from the frame bundle the
    server returns, not from local project files.
    """
    policy = policy or SimPolicy()
    annotator = SimAnnotator(truth, policy)

    resp = client.post(f"/api/v1/projects/{project_id}/sessions", json={"actor": "sim"})
    resp.raise_for_status()
    body = resp.json()
    sid = body["session_id"]
    n = body["n_frames"]
    pending = body["pending"]
    limit = max_steps or (4 * n + 16)
    steps = 0

    def put(frame: int, ann: SoundingAnnotation) -> dict:
        r = client.put(f"/api/v1/sessions/{sid}/frames/{frame}/annotation",
                       json={"annotation": ann.to_json()})
        r.raise_for_status()
        return r.json()

    if manual:
        for frame in range(n):
            ann = annotator.annotation_for(frame, (), hand_drawn_only=True)
            put(frame, ann)
            steps += 1
    else:
        while steps < limit:
            if pending is None:
                break
            bundle = client.get(f"/api/v1/sessions/{sid}/frames/{pending}").json()
            dets = tuple(
                DetectedObject(
                    id=c["id"],
                    box=BoundingBox(c["box"]["x"], c["box"]["y"], c["box"]["w"], c["box"]["h"]),
                    class_label=c["label"],
                    confidence=c["confidence"],
                )
                for c in bundle["candidates"]
            )
            ann = annotator.annotation_for(pending, dets)
            result = put(pending, ann)
            pending = result["decision"]["frame"]
            steps += 1
        else:
            raise RuntimeError(f"simulation exceeded {limit} steps without finishing")

    export = client.get(f"/api/v1/sessions/{sid}/export").json()
    human = sum(1 for f in export["frames"] if f["status"] == "human")
    return SimReport(session_id=sid, steps=steps, human_frames=human, export=export)
