"""Consensus-IoU metric and session statistics.

The consensus map weights each pixel by how many experts annotated it,
``g = min(sum_j b_j / consensus, 1)``; the score of a participant annotation
with pixel set A against ground-truth support G = {g > 0} is

    cIoU = sum_{i in A} g_i / (sum_i g_i + |A - G|).

Boxes live in continuous coordinates but are snapped to the pixel grid at
rasterization: a pixel belongs to a box iff its center lies inside. The metric
is computed analytically over the rectangle arrangement; ``ConsensusMap.g``
materializes the per-pixel weights for inspection and for the raster oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .model import BoundingBox, SoundingAnnotation

if TYPE_CHECKING:
    from .model import FrameStatus

PixelRect = tuple[int, int, int, int]  # (x0, x1, y0, y1), half-open pixel spans


def snap_box(box: BoundingBox, frame_w: int, frame_h: int) -> PixelRect | None:
    """Pixel span covered by a box: columns/rows whose centers fall inside."""
    x0 = max(0, math.ceil(box.x - 0.5))
    x1 = min(frame_w, math.ceil(box.x + box.w - 0.5))
    y0 = max(0, math.ceil(box.y - 0.5))
    y1 = min(frame_h, math.ceil(box.y + box.h - 0.5))
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, x1, y0, y1)


def _snap_annotation(ann: SoundingAnnotation, frame_w: int, frame_h: int) -> tuple[PixelRect, ...]:
    rects = []
    for item in ann.items:
        rect = snap_box(item.box, frame_w, frame_h)
        if rect is not None:
            rects.append(rect)
    return tuple(rects)


@dataclass(frozen=True)
class ConsensusMap:
    """Pixel-weighted expert ground truth for one frame."""

    frame_w: int
    frame_h: int
    consensus_param: int
    expert_rects: tuple[tuple[PixelRect, ...], ...]
    _g_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.consensus_param < 1:
            raise ValueError("consensus_param must be >= 1")

    @property
    def g(self) -> np.ndarray:
        """Per-pixel weights in [0, 1], shape (frame_h, frame_w)."""
        if not self._g_cache:
            acc = np.zeros((self.frame_h, self.frame_w), dtype=np.float64)
            for rects in self.expert_rects:
                binary = np.zeros_like(acc)
                for x0, x1, y0, y1 in rects:
                    binary[y0:y1, x0:x1] = 1.0
                acc += binary
            self._g_cache.append(np.minimum(acc / self.consensus_param, 1.0))
        return self._g_cache[0]


def consensus_map(
    expert_annotations: list[SoundingAnnotation],
    dims: tuple[int, int],
    consensus_param: int = 1,
) -> ConsensusMap:
    """Combine expert box annotations into a weighted score map."""
    if not expert_annotations:
        raise ValueError("at least one expert annotation is required")
    frame_w, frame_h = dims
    return ConsensusMap(
        frame_w=frame_w,
        frame_h=frame_h,
        consensus_param=consensus_param,
        expert_rects=tuple(
            _snap_annotation(ann, frame_w, frame_h) for ann in expert_annotations
        ),
    )


def _covers(rects: tuple[PixelRect, ...], x0: int, y0: int) -> bool:
    return any(rx0 <= x0 and x0 < rx1 and ry0 <= y0 and y0 < ry1 for rx0, rx1, ry0, ry1 in rects)


def ciou(participant: SoundingAnnotation, cmap: ConsensusMap) -> float:
    """Consensus IoU of a participant annotation against the expert map.

    Computed exactly over the rectangle arrangement (no rasterization). With
    no expert pixels at all, an empty participant scores 1.0 (agreement on
    silence) and a non-empty one scores 0.0.
    """
    part_rects = _snap_annotation(participant, cmap.frame_w, cmap.frame_h)
    all_rects = [r for rects in cmap.expert_rects for r in rects] + list(part_rects)

    xs = sorted({v for x0, x1, _, _ in all_rects for v in (x0, x1)})
    ys = sorted({v for _, _, y0, y1 in all_rects for v in (y0, y1)})

    sum_g = 0.0
    sum_g_in_a = 0.0
    a_minus_g = 0.0
    for xi in range(len(xs) - 1):
        cell_w = xs[xi + 1] - xs[xi]
        for yi in range(len(ys) - 1):
            cell_h = ys[yi + 1] - ys[yi]
            x, y = xs[xi], ys[yi]
            n_experts = sum(1 for rects in cmap.expert_rects if _covers(rects, x, y))
            g = min(n_experts / cmap.consensus_param, 1.0)
            area = cell_w * cell_h
            sum_g += g * area
            if _covers(part_rects, x, y):
                sum_g_in_a += g * area
                if n_experts == 0:
                    a_minus_g += area

    if sum_g == 0.0:
        return 1.0 if not part_rects else 0.0
    return sum_g_in_a / (sum_g + a_minus_g)


@dataclass(frozen=True)
class SessionStats:
    """Provenance counts and accuracy for one annotation session."""

    n_frames: int
    manual_count: int
    auto_count: int
    auto_modified_count: int
    skipped_count: int
    ciou_per_frame: tuple[float | None, ...] = ()
    mean_ciou: float | None = None
    mean_seconds_per_human_frame: float | None = None

    @property
    def manual_fraction(self) -> float:
        return self.manual_count / self.n_frames if self.n_frames else 0.0

    @property
    def auto_fraction(self) -> float:
        return self.auto_count / self.n_frames if self.n_frames else 0.0

    @property
    def auto_modified_fraction(self) -> float:
        return self.auto_modified_count / self.n_frames if self.n_frames else 0.0

    @property
    def skipped_fraction(self) -> float:
        return self.skipped_count / self.n_frames if self.n_frames else 0.0

    @property
    def automation_fraction(self) -> float:
        return self.auto_fraction + self.auto_modified_fraction

    def to_json(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "manual_count": self.manual_count,
            "auto_count": self.auto_count,
            "auto_modified_count": self.auto_modified_count,
            "skipped_count": self.skipped_count,
            "manual_fraction": self.manual_fraction,
            "auto_fraction": self.auto_fraction,
            "auto_modified_fraction": self.auto_modified_fraction,
            "skipped_fraction": self.skipped_fraction,
            "mean_ciou": self.mean_ciou,
            "mean_seconds_per_human_frame": self.mean_seconds_per_human_frame,
            "ciou_per_frame": list(self.ciou_per_frame),
        }

    def text_table(self) -> str:
        rows = [
            ("frames", str(self.n_frames), ""),
            ("manual", str(self.manual_count), f"{self.manual_fraction:.1%}"),
            ("auto", str(self.auto_count), f"{self.auto_fraction:.1%}"),
            ("auto_modified", str(self.auto_modified_count), f"{self.auto_modified_fraction:.1%}"),
            ("skipped_audio_gate", str(self.skipped_count), f"{self.skipped_fraction:.1%}"),
        ]
        if self.mean_ciou is not None:
            rows.append(("mean cIoU", f"{self.mean_ciou:.4f}", ""))
        if self.mean_seconds_per_human_frame is not None:
            rows.append(("sec/human frame", f"{self.mean_seconds_per_human_frame:.2f}", ""))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {count:>8}  {frac:>6}" for name, count, frac in rows)


def compute_session_stats(
    status: Sequence["FrameStatus"],
    annotations: dict[int, SoundingAnnotation],
    dims: tuple[int, int],
    ground_truth: dict[int, SoundingAnnotation] | None = None,
    consensus_param: int = 1,
    mean_seconds_per_human_frame: float | None = None,
) -> SessionStats:
    """Summarize a session; cIoU columns appear only when ground truth exists.

    Ground truth acts as a single-expert consensus. Frames missing from the
    truth file are excluded from the mean rather than scored as disagreement.
    """
    from .model import FrameStatus

    counts = {s: 0 for s in FrameStatus}
    for s in status:
        counts[s] += 1

    ciou_per_frame: list[float | None] = [None] * len(status)
    mean: float | None = None
    if ground_truth is not None and dims[0] > 0 and dims[1] > 0:
        scored: list[float] = []
        for i in range(len(status)):
            truth = ground_truth.get(i)
            if truth is None:
                continue
            cmap = consensus_map([truth], dims, consensus_param)
            part = annotations.get(i) or SoundingAnnotation(frame_index=i)
            value = ciou(part, cmap)
            ciou_per_frame[i] = value
            scored.append(value)
        if scored:
            mean = sum(scored) / len(scored)

    return SessionStats(
        n_frames=len(status),
        manual_count=counts[FrameStatus.HUMAN],
        auto_count=counts[FrameStatus.AUTO],
        auto_modified_count=counts[FrameStatus.AUTO_MODIFIED],
        skipped_count=counts[FrameStatus.SKIPPED_AUDIO_GATE],
        ciou_per_frame=tuple(ciou_per_frame),
        mean_ciou=mean,
        mean_seconds_per_human_frame=mean_seconds_per_human_frame,
    )
