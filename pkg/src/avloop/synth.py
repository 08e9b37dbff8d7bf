"""Synthetic clip generator for benchmarks and tests.

Produces a full project directory: flat-color PNG frames with the sounding
object drawn in, one-second sine-tone WAV clips, detector/tagger sidecars,
and an export-shaped ground-truth file. Content is piecewise constant: the
clip is split into segments at the requested change points, and each segment
has its own box, class label, sound label, and tone.

Detector noise is optional: ``miss_rate`` drops the true detection from a
frame (forcing a hand-drawn box), ``spurious_rate`` adds a low-confidence
distractor.
"""

from __future__ import annotations

import logging
import math
import random
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw

from .model import AnnotationItem, BoundingBox, Provenance, SoundingAnnotation
from .store import (
    AUDIO_DIR,
    FRAMES_DIR,
    GROUND_TRUTH_NAME,
    SIDECAR_DIR,
    Project,
    canonical_json,
    frame_audio_name,
    frame_image_name,
    ingest,
    write_annotation_file,
)

logger = logging.getLogger(__name__)

LABEL_POOL = ("dog", "music", "speech", "car", "bird", "cat", "train", "drum")
CLASS_POOL = ("dog", "guitar", "person", "car", "bird", "cat", "train", "drum")
BG_COLORS = ((30, 30, 60), (60, 30, 30), (30, 60, 30), (60, 60, 20),
             (40, 20, 60), (20, 50, 50), (70, 40, 10), (25, 25, 25))
SAMPLE_RATE = 8000


@dataclass(frozen=True)
class SynthSpec:
    """Knobs for one synthetic clip."""

    n_frames: int = 80
    change_points: tuple[int, ...] = ()
    seed: int = 0
    fps: int = 8
    width: int = 128
    height: int = 96
    miss_rate: float = 0.0
    spurious_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        bad = [c for c in self.change_points if not 1 <= c < self.n_frames]
        if bad:
            raise ValueError(f"change points out of range (1..n-1): {bad}")
        if len(set(self.change_points)) != len(self.change_points):
            raise ValueError("duplicate change points")


def pick_change_points(n_frames: int, count: int, rng: random.Random) -> tuple[int, ...]:
    if count >= n_frames:
        raise ValueError("more change points than frame gaps")
    return tuple(sorted(rng.sample(range(1, n_frames), count)))


@dataclass(frozen=True)
class _Segment:
    start: int
    end: int  # exclusive
    box: BoundingBox
    sound_label: str
    class_label: str
    bg: tuple[int, int, int]
    tone_hz: float


def _plan_segments(spec: SynthSpec, rng: random.Random) -> list[_Segment]:
    bounds = [0, *sorted(spec.change_points), spec.n_frames]
    segments = []
    for idx in range(len(bounds) - 1):
        w = float(rng.randint(18, min(40, spec.width - 2)))
        h = float(rng.randint(14, min(36, spec.height - 2)))
        x = float(rng.randint(0, int(spec.width - w)))
        y = float(rng.randint(0, int(spec.height - h)))
        segments.append(_Segment(
            start=bounds[idx],
            end=bounds[idx + 1],
            box=BoundingBox(x, y, w, h),
            sound_label=LABEL_POOL[idx % len(LABEL_POOL)],
            class_label=CLASS_POOL[idx % len(CLASS_POOL)],
            bg=BG_COLORS[idx % len(BG_COLORS)],
            tone_hz=180.0 + 55.0 * (idx % 8),
        ))
    return segments


def _tone_bytes(freq: float) -> bytes:
    amplitude = 0.3 * 32767
    return b"".join(
        struct.pack("<h", int(amplitude * math.sin(2 * math.pi * freq * t / SAMPLE_RATE)))
        for t in range(SAMPLE_RATE)
    )


def _write_wav(path: Path, pcm: bytes) -> None:
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(SAMPLE_RATE)
        wav.writeframes(pcm)


def _render_frame(spec: SynthSpec, seg: _Segment) -> Image.Image:
    img = Image.new("RGB", (spec.width, spec.height), seg.bg)
    draw = ImageDraw.Draw(img)
    b = seg.box
    draw.rectangle([b.x, b.y, b.x + b.w - 1, b.y + b.h - 1], fill=(220, 180, 60))
    return img


def generate(root: Path | str, spec: SynthSpec, name: str | None = None) -> Project:
    """Write a complete synthetic project and return it validated."""
    root = Path(root)
    rng = random.Random(spec.seed)
    segments = _plan_segments(spec, rng)
    for sub in (FRAMES_DIR, AUDIO_DIR, SIDECAR_DIR):
        (root / sub).mkdir(parents=True, exist_ok=True)

    det_frames, tag_frames = [], []
    seg_images = {id(seg): _render_frame(spec, seg) for seg in segments}
    seg_tones = {id(seg): _tone_bytes(seg.tone_hz) for seg in segments}

    for seg in segments:
        for i in range(seg.start, seg.end):
            seg_images[id(seg)].save(root / FRAMES_DIR / frame_image_name(i))
            _write_wav(root / AUDIO_DIR / frame_audio_name(i), seg_tones[id(seg)])

            objects = []
            if rng.random() >= spec.miss_rate:
                objects.append({
                    "id": 0,
                    "box": [seg.box.x, seg.box.y, seg.box.w, seg.box.h],
                    "label": seg.class_label,
                    "confidence": 0.97,
                })
            if rng.random() < spec.spurious_rate:
                sw, sh = float(rng.randint(10, 25)), float(rng.randint(8, 20))
                objects.append({
                    "id": 1,
                    "box": [float(rng.randint(0, spec.width - int(sw))),
                            float(rng.randint(0, spec.height - int(sh))), sw, sh],
                    "label": rng.choice(CLASS_POOL),
                    "confidence": round(rng.uniform(0.3, 0.6), 2),
                })
            det_frames.append({"index": i, "objects": objects})
            tag_frames.append({
                "index": i,
                "tags": [{"label": seg.sound_label, "confidence": 0.9}],
            })

    (root / SIDECAR_DIR / "detections.json").write_text(
        canonical_json({"frames": det_frames}) + "\n")
    (root / SIDECAR_DIR / "audiotags.json").write_text(
        canonical_json({"frames": tag_frames}) + "\n")

    project = ingest(root, name=name)
    write_annotation_file(root / GROUND_TRUTH_NAME,
                          ground_truth_payload(project, segments))
    return project


def ground_truth_payload(project: Project, segments: list[_Segment]) -> dict:
    """Ground truth in the export shape: every frame human, hand-drawn boxes."""
    frames = []
    for seg in segments:
        for i in range(seg.start, seg.end):
            item = AnnotationItem(box=seg.box, sound_label=seg.sound_label,
                                  provenance=Provenance.HUMAN)
            ann = SoundingAnnotation(frame_index=i, items=(item,))
            frames.append({"index": i, "status": "human",
                           "items": [it.to_json() for it in ann.items]})
    frames.sort(key=lambda f: f["index"])
    return {
        "version": 1,
        "project": project.name,
        "fps": project.fps,
        "n_frames": project.manifest.n_frames,
        "frames": frames,
    }


def synthesize(root: Path | str, n_frames: int, changes: int | list[int],
               seed: int, miss_rate: float = 0.0, spurious_rate: float = 0.0,
               name: str | None = None) -> Project:
    """Convenience wrapper: integer ``changes`` are placed by the seeded RNG."""
    rng = random.Random(seed ^ 0x5EED)
    points = (tuple(changes) if isinstance(changes, (list, tuple))
              else pick_change_points(n_frames, changes, rng))
    spec = SynthSpec(n_frames=n_frames, change_points=points, seed=seed,
                     miss_rate=miss_rate, spurious_rate=spurious_rate)
    return generate(root, spec, name=name)
