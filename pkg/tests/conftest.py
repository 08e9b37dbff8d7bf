"""Shared fixtures, builders, and hypothesis strategies."""

from __future__ import annotations

import json
import math
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import pytest
from hypothesis import strategies as st
from PIL import Image

from avloop.model import (
    AnnotationItem,
    AudioTag,
    BoundingBox,
    DetectedObject,
    FrameRecord,
    SoundingAnnotation,
)
from avloop.store import ingest, write_annotation_file


# -- in-memory projects -----------------------------------------------------------


@dataclass
class FakeProject:
    """Just enough project surface for the scheduler: frames only."""

    frames: tuple[FrameRecord, ...]


def two_segment_frames(n: int, change: int,
                       box_a: BoundingBox | None = None,
                       box_b: BoundingBox | None = None,
                       labels: tuple[str, str] = ("dog", "music"),
                       classes: tuple[str, str] = ("dog", "guitar"),
                       ) -> tuple[FrameRecord, ...]:
    """Piecewise-constant clip with one change: segment A then segment B."""
    box_a = box_a or BoundingBox(5, 5, 20, 16)
    box_b = box_b or BoundingBox(40, 20, 24, 18)
    frames = []
    for i in range(n):
        seg = 0 if i < change else 1
        frames.append(FrameRecord(
            index=i,
            timestamp_ms=i * 125,
            image_ref="",
            detections=(DetectedObject(0, (box_a, box_b)[seg], classes[seg], 0.95),),
            audio_tags=(AudioTag(labels[seg], 0.9),),
        ))
    return tuple(frames)


def segment_annotation(frame: int, change: int,
                       box_a: BoundingBox | None = None,
                       box_b: BoundingBox | None = None,
                       labels: tuple[str, str] = ("dog", "music"),
                       detection_id: int | None = 0) -> SoundingAnnotation:
    """Ground-truth answer for a frame of a two-segment clip."""
    box_a = box_a or BoundingBox(5, 5, 20, 16)
    box_b = box_b or BoundingBox(40, 20, 24, 18)
    seg = 0 if frame < change else 1
    item = AnnotationItem(box=(box_a, box_b)[seg], sound_label=labels[seg],
                          detection_id=detection_id)
    return SoundingAnnotation(frame_index=frame, items=(item,))


def drive_engine_two_segment(engine, change: int, max_steps: int = 500) -> list[int]:
    """Answer every request of a two-segment engine from ground truth."""
    requests = []
    steps = 0
    while engine.state.pending is not None:
        frame = engine.state.pending
        requests.append(frame)
        engine.on_human_annotation(frame, segment_annotation(frame, change))
        steps += 1
        if steps > max_steps:
            raise AssertionError("engine did not terminate")
    return requests


# -- on-disk projects ---------------------------------------------------------------


def _write_wav(path: Path, freq: float = 220.0) -> None:
    pcm = b"".join(
        struct.pack("<h", int(9000 * math.sin(2 * math.pi * freq * t / 8000)))
        for t in range(8000)
    )
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(8000)
        wav.writeframes(pcm)


def build_disk_project(root: Path, det_frames: list[dict], tag_frames: list[dict],
                       n: int, dims: tuple[int, int] = (64, 48),
                       ground_truth: dict | None = None):
    """Materialize a minimal valid project directory from sidecar payloads."""
    for sub in ("frames", "audio", "sidecar"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    img = Image.new("RGB", dims, (25, 25, 50))
    pcm_written = False
    for i in range(n):
        img.save(root / "frames" / f"{i:06d}.png")
        target = root / "audio" / f"clip_{i:06d}.wav"
        if not pcm_written:
            _write_wav(target)
            first = target.read_bytes()
            pcm_written = True
        else:
            target.write_bytes(first)
    (root / "sidecar" / "detections.json").write_text(json.dumps({"frames": det_frames}))
    (root / "sidecar" / "audiotags.json").write_text(json.dumps({"frames": tag_frames}))
    project = ingest(root)
    if ground_truth is not None:
        write_annotation_file(root / "ground_truth.json", ground_truth)
    return project


def gate_project(root: Path):
    """8 frames, one constant detection; soundtrack contradicts it on frames 2-4.

    A ground-truth 'dog' annotation everywhere makes the populate gate skip
    exactly frames 3 and 4 when driven by the scripted annotator.
    """
    det = [{"index": i, "objects": [
        {"id": 0, "box": [10.0, 10.0, 20.0, 15.0], "label": "dog", "confidence": 0.95}
    ]} for i in range(8)]
    tags = [{"index": i, "tags": [
        {"label": "dog" if i < 2 or i >= 5 else "music", "confidence": 0.9}
    ]} for i in range(8)]
    gt_item = AnnotationItem(box=BoundingBox(10, 10, 20, 15), sound_label="dog")
    truth = {
        "version": 1, "project": root.name, "fps": 8, "n_frames": 8,
        "frames": [{"index": i, "status": "human", "items": [gt_item.to_json()]}
                   for i in range(8)],
    }
    return build_disk_project(root, det, tags, 8, ground_truth=truth)


@pytest.fixture
def tmp_gate_project(tmp_path):
    return gate_project(tmp_path / "gate")


@pytest.fixture
def tmp_synth_project(tmp_path):
    from avloop.synth import synthesize

    return synthesize(tmp_path / "clip", n_frames=24, changes=[9, 17], seed=11)


# -- hypothesis strategies -------------------------------------------------------------


def boxes(max_pos: float = 60.0, max_size: float = 40.0) -> st.SearchStrategy[BoundingBox]:
    coord = st.floats(0, max_pos, allow_nan=False, allow_infinity=False, width=32)
    size = st.floats(1, max_size, allow_nan=False, allow_infinity=False, width=32)
    return st.builds(BoundingBox, x=coord, y=coord, w=size, h=size)


def labels() -> st.SearchStrategy[str]:
    return st.sampled_from(["dog", "music", "speech", "car", "bird"])


def annotation_items(det_ids=st.one_of(st.none(), st.integers(0, 5))):
    return st.builds(AnnotationItem, box=boxes(), sound_label=labels(),
                     detection_id=det_ids)


def annotations(frame_index: int = 0, max_items: int = 4) -> st.SearchStrategy[SoundingAnnotation]:
    def build(items: list[AnnotationItem]) -> SoundingAnnotation:
        # Unique target keys are a model invariant; dedupe instead of filtering
        # so shrinking stays effective.
        seen, kept = set(), []
        for item in items:
            if item.target_key() in seen:
                continue
            seen.add(item.target_key())
            kept.append(item)
        return SoundingAnnotation(frame_index=frame_index, items=tuple(kept))

    return st.lists(annotation_items(), max_size=max_items).map(build)
