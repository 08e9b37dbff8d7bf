#!/usr/bin/env python3
"""Demonstrate the audio gate: propagation refuses frames that stopped sounding.

Builds a small clip where one object is detected in every frame but the
soundtrack contradicts it in the middle (the tagger hears "music" instead of
"dog" on frames 2-4), runs the scripted annotator, and prints the per-frame
outcome. Frames whose sound no longer matches the anchor annotation are left
as skipped_audio_gate for human review instead of being silently propagated.

Usage:
    python3 scripts/gate_demo.py [--workdir DIR]
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from avloop.session import Session
from avloop.simulate import SimPolicy, run_simulation
from avloop.store import ingest, write_annotation_file

N = 8
BOX = [10.0, 10.0, 20.0, 15.0]


def build_project(root: Path):
    """One constant detection; tags flip dog -> music -> dog."""
    from PIL import Image, ImageDraw
    import math
    import struct
    import wave

    for sub in ("frames", "audio", "sidecar"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    tag_for = lambda i: "dog" if i < 2 or i >= 5 else "music"
    for i in range(N):
        img = Image.new("RGB", (64, 48), (28, 28, 48))
        ImageDraw.Draw(img).rectangle(
            [BOX[0], BOX[1], BOX[0] + BOX[2] - 1, BOX[1] + BOX[3] - 1],
            fill=(210, 170, 60))
        img.save(root / "frames" / f"{i:06d}.png")
        freq = 220.0 if tag_for(i) == "dog" else 440.0
        pcm = b"".join(struct.pack("<h", int(9000 * math.sin(2 * math.pi * freq * t / 8000)))
                       for t in range(8000))
        with wave.open(str(root / "audio" / f"clip_{i:06d}.wav"), "wb") as wav:
            wav.setnchannels(1)
            wav.setsampwidth(2)
            wav.setframerate(8000)
            wav.writeframes(pcm)

    detections = {"frames": [
        {"index": i, "objects": [{"id": 0, "box": BOX, "label": "dog", "confidence": 0.95}]}
        for i in range(N)
    ]}
    audiotags = {"frames": [
        {"index": i, "tags": [{"label": tag_for(i), "confidence": 0.9}]}
        for i in range(N)
    ]}
    (root / "sidecar" / "detections.json").write_text(json.dumps(detections))
    (root / "sidecar" / "audiotags.json").write_text(json.dumps(audiotags))
    project = ingest(root)

    truth = {
        "version": 1, "project": project.name, "fps": project.fps, "n_frames": N,
        "frames": [{"index": i, "status": "human", "items": [
            {"box": {"x": BOX[0], "y": BOX[1], "w": BOX[2], "h": BOX[3]},
             "sound_label": "dog", "provenance": "human"}]} for i in range(N)],
    }
    write_annotation_file(root / "ground_truth.json", truth)
    return ingest(root)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=None)
    args = parser.parse_args()

    root = (args.workdir or Path(tempfile.mkdtemp(prefix="avloop-gate-"))) / "gate"
    project = build_project(root)
    report = run_simulation(project, SimPolicy())

    print(f"{'frame':>5}  {'heard':>6}  status")
    for frame in report.export["frames"]:
        i = frame["index"]
        heard = project.frames[i].audio_tags[0].label
        marker = "  <- held for review" if frame["status"] == "skipped_audio_gate" else ""
        print(f"{i:>5}  {heard:>6}  {frame['status']}{marker}")

    print()
    print(Session.open(project, report.session_id).stats().text_table())
    print(f"\nproject kept in {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
