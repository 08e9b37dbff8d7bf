"""Perception inputs: precomputed sidecar files or a remote inference service.

Both adapters yield the same per-frame shapes (detections, audio tags) so the
rest of the pipeline never knows where perception came from. The reranker is
a tiny co-occurrence table between heard sound labels and detector class
labels, learned online from human picks.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

from .model import AudioTag, BoundingBox, DetectedObject, SoundingAnnotation

logger = logging.getLogger(__name__)

DEFAULT_INFER_URL = os.environ.get("AVLOOP_INFER_URL", "")


class AdapterError(RuntimeError):
    """Perception input unavailable or malformed."""


def _parse_detection(obj: dict) -> DetectedObject:
    try:
        x, y, w, h = obj["box"]
        return DetectedObject(
            id=int(obj["id"]),
            box=BoundingBox(float(x), float(y), float(w), float(h)),
            class_label=str(obj["label"]),
            confidence=float(obj["confidence"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AdapterError(f"malformed detection object: {obj!r}") from exc


def _parse_tag(obj: dict) -> AudioTag:
    try:
        return AudioTag(label=str(obj["label"]), confidence=float(obj["confidence"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise AdapterError(f"malformed audio tag: {obj!r}") from exc


def _load_frames_file(path: Path, kind: str) -> dict[int, list]:
    if not path.is_file():
        raise AdapterError(f"missing {kind} sidecar: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AdapterError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("frames"), list):
        raise AdapterError(f'{path} must be an object with a "frames" list')
    out: dict[int, list] = {}
    for entry in payload["frames"]:
        if not isinstance(entry, dict) or "index" not in entry:
            raise AdapterError(f"frame entry without index in {path}")
        out[int(entry["index"])] = entry.get(
            "objects" if kind == "detections" else "tags", []
        )
    return out


@dataclass
class FileDetectorAdapter:
    """Detections from a ``detections.json`` sidecar, keyed by frame index."""

    path: Path

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        self._by_frame = _load_frames_file(self.path, "detections")

    def detect(self, frame_index: int) -> tuple[DetectedObject, ...]:
        raw = self._by_frame.get(frame_index, [])
        return tuple(_parse_detection(o) for o in raw)


@dataclass
class FileTaggerAdapter:
    """Audio tags from an ``audiotags.json`` sidecar, keyed by frame index."""

    path: Path

    def __post_init__(self) -> None:
        self.path = Path(self.path)
        self._by_frame = _load_frames_file(self.path, "audiotags")

    def tag(self, frame_index: int) -> tuple[AudioTag, ...]:
        raw = self._by_frame.get(frame_index, [])
        return tuple(_parse_tag(t) for t in raw)


class _RemoteBase:
    """Shared retry/transport plumbing for the HTTP inference adapters."""

    def __init__(self, base_url: str | None = None, retries: int = 2,
                 timeout: float = 10.0, client: httpx.Client | None = None):
        self.base_url = (base_url or DEFAULT_INFER_URL).rstrip("/")
        if not self.base_url:
            raise AdapterError("no inference URL configured (set AVLOOP_INFER_URL)")
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, route: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(f"{self.base_url}{route}", json=payload)
                resp.raise_for_status()
                return resp.json()
            except (httpx.HTTPError, json.JSONDecodeError) as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(0.1 * (attempt + 1))
        raise AdapterError(f"inference call {route} failed after retries: {last}") from last


class RemoteDetector(_RemoteBase):
    """Object detections from a remote service; expects the sidecar shape back."""

    def detect(self, frame_index: int, image_ref: str = "") -> tuple[DetectedObject, ...]:
        data = self._post("/detect", {"frame": frame_index, "image": image_ref})
        return tuple(_parse_detection(o) for o in data.get("objects", []))


class RemoteTagger(_RemoteBase):
    """Audio tags from a remote service; expects the sidecar shape back."""

    def tag(self, frame_index: int, audio_ref: str = "") -> tuple[AudioTag, ...]:
        data = self._post("/tag", {"frame": frame_index, "audio": audio_ref})
        return tuple(_parse_tag(t) for t in data.get("tags", []))


# -- audio-informed candidate ranking ------------------------------------------


@dataclass
class RerankerModel:
    """Co-occurrence counts between sound labels and detector class labels.

    Learned only from human-confirmed, detector-backed picks; custom boxes
    carry no class label so they contribute nothing.
    """

    counts: dict[str, Counter] = field(default_factory=dict)

    def learn(self, annotation: SoundingAnnotation,
              detections: Sequence[DetectedObject]) -> None:
        by_id = {d.id: d for d in detections}
        for item in annotation.items:
            if item.detection_id is None:
                continue
            det = by_id.get(item.detection_id)
            if det is None:
                continue
            self.counts.setdefault(item.sound_label, Counter())[det.class_label] += 1

    def affinity(self, sound_label: str, class_label: str) -> int:
        return self.counts.get(sound_label, Counter()).get(class_label, 0)

    def to_json(self) -> dict:
        return {s: dict(c) for s, c in sorted(self.counts.items())}

    @classmethod
    def from_json(cls, data: dict) -> "RerankerModel":
        return cls(counts={s: Counter(c) for s, c in data.items()})


def rank_candidates(detections: Sequence[DetectedObject],
                    audio_tags: Sequence[AudioTag],
                    model: RerankerModel | None = None,
                    tag_threshold: float = 0.5) -> list[DetectedObject]:
    """Order detections by learned affinity with the frame's confident tags.

    Detections are never dropped; zero-affinity ones simply sort last, then by
    confidence descending and id ascending so the order is deterministic.
    """
    confident = [t.label for t in audio_tags if t.confidence >= tag_threshold]

    def score(det: DetectedObject) -> int:
        if model is None:
            return 0
        return sum(model.affinity(label, det.class_label) for label in confident)

    return sorted(detections, key=lambda d: (-score(d), -d.confidence, d.id))
