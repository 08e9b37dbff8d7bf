"""Session runtime: one engine + one operation log + one reranker.

Everything that mutates a session goes through here, so the HTTP service and
the scripted annotator produce byte-identical logs and exports for the same
inputs. Reopening a session replays its log through a fresh engine; no
derived state is ever read back from disk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .adapters import RerankerModel, rank_candidates
from .evaluation import SessionStats, compute_session_stats
from .model import DetectedObject, FrameStatus, MatchPolicy, SoundingAnnotation
from .scheduler import SchedulerDecision, SessionEngine
from .store import (
    OperationLog,
    Project,
    SessionMeta,
    create_session_dir,
    export_payload,
    load_session_meta,
    session_dir,
    session_lock,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotateResult:
    """Outcome of one human write: new status, next decision, new revision."""

    frame: int
    status: FrameStatus
    decision: SchedulerDecision
    revision: int

    def to_json(self) -> dict[str, Any]:
        return {
            "frame": self.frame,
            "status": self.status.value,
            "decision": self.decision.to_json(),
            "revision": self.revision,
        }


class Session:
    """A live annotation session bound to its project directory."""

    def __init__(self, project: Project, meta: SessionMeta, engine: SessionEngine,
                 log: OperationLog, reranker: RerankerModel):
        self.project = project
        self.meta = meta
        self.engine = engine
        self.log = log
        self.reranker = reranker

    # -- construction ----------------------------------------------------------

    @classmethod
    def create(cls, project: Project, session_id: str | None = None,
               policy: MatchPolicy | None = None, actor: str = "human") -> "Session":
        meta = create_session_dir(project, session_id, policy, actor)
        log = OperationLog(session_dir(project, meta.session_id) / "log.jsonl")
        engine = SessionEngine(project, meta.policy)
        return cls(project, meta, engine, log, RerankerModel())

    @classmethod
    def open(cls, project: Project, session_id: str) -> "Session":
        """Reopen by replaying the log; raises StoreError on corruption."""
        meta = load_session_meta(project, session_id)
        log = OperationLog(session_dir(project, session_id) / "log.jsonl")
        records = log.read_all()
        engine = SessionEngine(project, meta.policy)
        session = cls(project, meta, engine, log, RerankerModel())
        for record in records:
            session._apply(record)
        return session

    def _apply(self, record: dict[str, Any]) -> None:
        op, payload = record["op"], record["payload"]
        if op in ("annotate", "modify"):
            frame = int(payload["frame"])
            annotation = SoundingAnnotation.from_json(payload["annotation"])
            if payload.get("confirm"):
                self.engine.confirm_preempt(frame, annotation,
                                            modified=bool(payload.get("modified")))
            else:
                self.engine.on_human_annotation(frame, annotation)
                if self.engine.state.status[frame] == FrameStatus.HUMAN:
                    self._learn(frame, annotation)
        # populate / skip / navigate records are informational; replaying the
        # human ops regenerates their effects deterministically.

    def _learn(self, frame: int, annotation: SoundingAnnotation) -> None:
        self.reranker.learn(annotation, self.project.frames[frame].detections)

    # -- state access ----------------------------------------------------------

    @property
    def state(self):
        return self.engine.state

    @property
    def session_id(self) -> str:
        return self.meta.session_id

    @property
    def revision(self) -> int:
        return self.log.next_seq

    def frame_status(self, frame: int) -> FrameStatus:
        return self.state.status[frame]

    def current_annotation(self, frame: int) -> SoundingAnnotation | None:
        return self.state.annotations.get(frame)

    def pending_frame(self) -> int | None:
        return self.state.pending

    def ranked_candidates(self, frame: int) -> list[DetectedObject]:
        rec = self.project.frames[frame]
        return rank_candidates(rec.detections, rec.audio_tags, self.reranker,
                               self.meta.policy.tag_threshold)

    def frame_bundle(self, frame: int) -> dict[str, Any]:
        """Everything a client needs to render one frame."""
        rec = self.project.frames[frame]
        ann = self.current_annotation(frame)
        return {
            "frame": frame,
            "timestamp_ms": rec.timestamp_ms,
            "image_url": f"/api/v1/projects/{self.project.name}/frames/{frame}/image",
            "audio_url": f"/api/v1/projects/{self.project.name}/frames/{frame}/audio",
            "status": self.frame_status(frame).value,
            "pending": self.state.pending,
            "candidates": [
                {
                    "id": d.id,
                    "box": d.box.to_json(),
                    "label": d.class_label,
                    "confidence": d.confidence,
                }
                for d in self.ranked_candidates(frame)
            ],
            "audio_tags": [
                {"label": t.label, "confidence": t.confidence} for t in rec.audio_tags
            ],
            "current_annotation": ann.to_json() if ann else None,
            "revision": self.revision,
        }

    # -- mutations (all lock + log) ---------------------------------------------

    def annotate(self, frame: int, annotation: SoundingAnnotation) -> AnnotateResult:
        """Apply a human annotation, log it, and return the next decision."""
        with session_lock(self.project, self.session_id):
            before = list(self.state.status)
            decision = self.engine.on_human_annotation(frame, annotation)
            status = self.state.status[frame]
            op = "annotate" if status == FrameStatus.HUMAN else "modify"
            self.log.append(op, {
                "frame": frame,
                "annotation": self.state.annotations[frame].to_json(),
            }, actor=self.meta.actor)
            if status == FrameStatus.HUMAN:
                self._learn(frame, self.state.annotations[frame])
            self._log_side_effects(before, decision)
            return AnnotateResult(frame, status, decision, self.revision)

    def _log_side_effects(self, before: list[FrameStatus],
                          decision: SchedulerDecision) -> None:
        filled = [i for i, (a, b) in enumerate(zip(before, self.state.status))
                  if b == FrameStatus.AUTO and a != b]
        skipped = [i for i, (a, b) in enumerate(zip(before, self.state.status))
                   if b == FrameStatus.SKIPPED_AUDIO_GATE and a != b]
        if filled or decision.populated:
            self.log.append("populate", {
                "ranges": [list(r) for r in decision.populated],
                "filled": filled,
            }, actor="system")
        for i in skipped:
            self.log.append("skip", {"frame": i, "reason": "audio-gate"}, actor="system")

    def preempt_next(self) -> tuple[int, SoundingAnnotation]:
        return self.engine.preempt_next()

    def confirm_preempt(self, frame: int, annotation: SoundingAnnotation,
                        modified: bool = False) -> AnnotateResult:
        with session_lock(self.project, self.session_id):
            status = self.engine.confirm_preempt(frame, annotation, modified)
            op = "modify" if modified else "annotate"
            self.log.append(op, {
                "frame": frame,
                "annotation": self.state.annotations[frame].to_json(),
                "confirm": True,
                "modified": modified,
            }, actor=self.meta.actor)
            decision = SchedulerDecision(frame=self.state.pending)
            return AnnotateResult(frame, status, decision, self.revision)

    def navigate(self, frame: int) -> None:
        """Record a Move To jump; navigation never mutates annotations."""
        if not 0 <= frame < self.state.n_frames:
            raise IndexError(f"frame {frame} out of range")
        with session_lock(self.project, self.session_id):
            self.log.append("navigate", {"frame": frame}, actor=self.meta.actor)

    # -- read-outs ----------------------------------------------------------------

    def stats(self) -> SessionStats:
        return compute_session_stats(
            self.state.status,
            self.state.annotations,
            self.project.dims,
            self.project.ground_truth(),
            mean_seconds_per_human_frame=self._mean_human_seconds(),
        )

    def _mean_human_seconds(self) -> float | None:
        stamps = [r["ts"] for r in self.log.read_all() if r["op"] in ("annotate", "modify")]
        if len(stamps) < 2:
            return None
        deltas = [b - a for a, b in zip(stamps, stamps[1:])]
        return sum(deltas) / len(deltas)

    def export(self) -> dict[str, Any]:
        return export_payload(self.project, self.state.status, self.state.annotations)

    def export_to(self, path: Path | str) -> None:
        from .store import write_annotation_file

        write_annotation_file(path, self.export())
