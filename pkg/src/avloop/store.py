"""On-disk project and session layout.

A project directory looks like::

    project.json              manifest (name, fps, frame count, dimensions)
    meta.json                 optional; fps override
    frames/000000.png ...     one image per frame
    audio/clip_000000.wav ... one 1-second clip per frame
    sidecar/detections.json   precomputed detector output
    sidecar/audiotags.json    precomputed audio tagger output
    ground_truth.json         optional; export-shaped reference annotations
    sessions/<sid>/           session.json + log.jsonl + lock

Sessions are an append-only operation log; loading a session replays the
human operations through a fresh engine, so state is never trusted from disk.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import uuid
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

from filelock import FileLock

from .adapters import AdapterError, FileDetectorAdapter, FileTaggerAdapter
from .model import FrameRecord, FrameStatus, MatchPolicy, SoundingAnnotation

logger = logging.getLogger(__name__)

MANIFEST_NAME = "project.json"
META_NAME = "meta.json"
FRAMES_DIR = "frames"
AUDIO_DIR = "audio"
SIDECAR_DIR = "sidecar"
SESSIONS_DIR = "sessions"
GROUND_TRUTH_NAME = "ground_truth.json"
DEFAULT_FPS = 8

LOG_OPS = ("annotate", "modify", "populate", "skip", "navigate")


class StoreError(RuntimeError):
    """Project or session data on disk is missing, malformed, or inconsistent.

    ``problems`` carries the full list so callers can report everything at
    once instead of fixing one item per run.
    """

    def __init__(self, message: str, problems: Sequence[str] = ()):
        super().__init__(message)
        self.problems = list(problems)


def canonical_json(obj: Any) -> str:
    """Stable compact JSON used for checksums and byte-comparable exports."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def frame_image_name(index: int) -> str:
    return f"{index:06d}.png"


def frame_audio_name(index: int) -> str:
    return f"clip_{index:06d}.wav"


@dataclass(frozen=True)
class ProjectManifest:
    name: str
    n_frames: int
    fps: int = DEFAULT_FPS
    frame_width: int = 0
    frame_height: int = 0
    created: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "n_frames": self.n_frames,
            "fps": self.fps,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "created": self.created,
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "ProjectManifest":
        return ProjectManifest(
            name=str(obj["name"]),
            n_frames=int(obj["n_frames"]),
            fps=int(obj.get("fps", DEFAULT_FPS)),
            frame_width=int(obj.get("frame_width", 0)),
            frame_height=int(obj.get("frame_height", 0)),
            created=str(obj.get("created", "")),
        )


@dataclass
class Project:
    """A validated project directory with perception preloaded per frame."""

    root: Path
    manifest: ProjectManifest
    frames: tuple[FrameRecord, ...]

    @property
    def name(self) -> str:
        return self.manifest.name

    @property
    def fps(self) -> int:
        return self.manifest.fps

    @property
    def dims(self) -> tuple[int, int]:
        return (self.manifest.frame_width, self.manifest.frame_height)

    def image_path(self, index: int) -> Path:
        return self.root / FRAMES_DIR / frame_image_name(index)

    def audio_path(self, index: int) -> Path:
        return self.root / AUDIO_DIR / frame_audio_name(index)

    def sessions_root(self) -> Path:
        return self.root / SESSIONS_DIR

    def session_ids(self) -> list[str]:
        root = self.sessions_root()
        if not root.is_dir():
            return []
        return sorted(p.name for p in root.iterdir() if (p / "session.json").is_file())

    def ground_truth(self) -> dict[int, SoundingAnnotation] | None:
        path = self.root / GROUND_TRUTH_NAME
        if not path.is_file():
            return None
        return load_annotation_file(path)


def _discover_frame_count(root: Path, problems: list[str]) -> int:
    frames_dir = root / FRAMES_DIR
    if not frames_dir.is_dir():
        problems.append(f"missing directory: {FRAMES_DIR}/")
        return 0
    pngs = sorted(frames_dir.glob("*.png"))
    if not pngs:
        problems.append(f"{FRAMES_DIR}/ contains no .png frames")
        return 0
    n = len(pngs)
    expected = {frame_image_name(i) for i in range(n)}
    actual = {p.name for p in pngs}
    for name in sorted(expected - actual):
        problems.append(f"missing frame image: {FRAMES_DIR}/{name}")
    for name in sorted(actual - expected):
        problems.append(f"unexpected frame image (numbering must be contiguous from 0): {name}")
    return n


def _validate_images(root: Path, n: int, problems: list[str]) -> tuple[int, int]:
    from PIL import Image  # deferred: not needed on pure-replay paths

    dims: tuple[int, int] | None = None
    for i in range(n):
        path = root / FRAMES_DIR / frame_image_name(i)
        if not path.is_file():
            continue  # already reported by discovery
        try:
            with Image.open(path) as im:
                if dims is None:
                    dims = im.size
                elif im.size != dims:
                    problems.append(
                        f"frame {i} has size {im.size[0]}x{im.size[1]}, "
                        f"expected {dims[0]}x{dims[1]}"
                    )
        except OSError as exc:
            problems.append(f"unreadable image {path.name}: {exc}")
    return dims or (0, 0)


def _validate_audio(root: Path, n: int, problems: list[str]) -> None:
    audio_dir = root / AUDIO_DIR
    if not audio_dir.is_dir():
        problems.append(f"missing directory: {AUDIO_DIR}/")
        return
    for i in range(n):
        path = audio_dir / frame_audio_name(i)
        if not path.is_file():
            problems.append(f"missing audio clip: {AUDIO_DIR}/{frame_audio_name(i)}")
    first = audio_dir / frame_audio_name(0)
    if first.is_file():
        try:
            with wave.open(str(first), "rb") as wav:
                wav.getnframes()
        except (wave.Error, EOFError, OSError) as exc:
            problems.append(f"first audio clip is not a readable WAV: {exc}")


def _load_sidecars(root: Path, n: int, problems: list[str]):
    detector = tagger = None
    det_path = root / SIDECAR_DIR / "detections.json"
    tag_path = root / SIDECAR_DIR / "audiotags.json"
    try:
        detector = FileDetectorAdapter(det_path)
    except AdapterError as exc:
        problems.append(str(exc))
    try:
        tagger = FileTaggerAdapter(tag_path)
    except AdapterError as exc:
        problems.append(str(exc))
    for adapter, label in ((detector, "detections"), (tagger, "audiotags")):
        if adapter is None:
            continue
        bad = sorted(i for i in adapter._by_frame if not 0 <= i < n)
        for i in bad:
            problems.append(f"{label}.json references out-of-range frame {i}")
    return detector, tagger


def _read_fps(root: Path, manifest_fps: int | None, problems: list[str]) -> int:
    fps = manifest_fps if manifest_fps else DEFAULT_FPS
    meta_path = root / META_NAME
    if meta_path.is_file():
        try:
            meta = json.loads(meta_path.read_text())
            fps = int(meta.get("fps", fps))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            problems.append(f"invalid {META_NAME}: {exc}")
    if fps < 1:
        problems.append(f"fps must be >= 1, got {fps}")
        fps = DEFAULT_FPS
    return fps


def _build_frames(n: int, fps: int, detector: FileDetectorAdapter,
                  tagger: FileTaggerAdapter, problems: list[str]) -> tuple[FrameRecord, ...]:
    records: list[FrameRecord] = []
    for i in range(n):
        try:
            records.append(FrameRecord(
                index=i,
                timestamp_ms=round(i * 1000 / fps),
                image_ref=f"{FRAMES_DIR}/{frame_image_name(i)}",
                detections=detector.detect(i),
                audio_tags=tagger.tag(i),
            ))
        except (AdapterError, ValueError) as exc:
            problems.append(f"frame {i}: {exc}")
    return tuple(records)


def ingest(root: Path | str, name: str | None = None) -> Project:
    """Validate a raw project directory and write its manifest.

    Collects every problem before failing so one run reports the lot.
    """
    root = Path(root)
    problems: list[str] = []
    if not root.is_dir():
        raise StoreError(f"not a directory: {root}", [f"not a directory: {root}"])

    n = _discover_frame_count(root, problems)
    dims = _validate_images(root, n, problems) if n else (0, 0)
    _validate_audio(root, n, problems)
    detector, tagger = _load_sidecars(root, n, problems)
    fps = _read_fps(root, None, problems)

    if problems:
        raise StoreError(
            f"project at {root} failed validation with {len(problems)} problem(s):\n"
            + "\n".join(f"  - {p}" for p in problems),
            problems,
        )

    manifest = ProjectManifest(
        name=name or root.name,
        n_frames=n,
        fps=fps,
        frame_width=dims[0],
        frame_height=dims[1],
        created=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )
    (root / MANIFEST_NAME).write_text(json.dumps(manifest.to_json(), indent=2) + "\n")
    frames = _build_frames(n, fps, detector, tagger, problems)
    if problems:
        raise StoreError("sidecar parsing failed:\n" + "\n".join(problems), problems)
    return Project(root=root, manifest=manifest, frames=frames)


def load_project(root: Path | str) -> Project:
    """Open an already-ingested project (manifest must exist)."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise StoreError(f"no {MANIFEST_NAME} in {root}; run ingest first")
    try:
        manifest = ProjectManifest.from_json(json.loads(manifest_path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise StoreError(f"corrupt {MANIFEST_NAME}: {exc}") from exc

    problems: list[str] = []
    fps = _read_fps(root, manifest.fps, problems)
    detector, tagger = _load_sidecars(root, manifest.n_frames, problems)
    if problems or detector is None or tagger is None:
        raise StoreError(
            "project load failed:\n" + "\n".join(f"  - {p}" for p in problems), problems
        )
    frames = _build_frames(manifest.n_frames, fps, detector, tagger, problems)
    if problems:
        raise StoreError(
            "sidecar parsing failed:\n" + "\n".join(f"  - {p}" for p in problems), problems
        )
    if fps != manifest.fps:
        manifest = ProjectManifest(**{**manifest.to_json(), "fps": fps})
    return Project(root=root, manifest=manifest, frames=frames)


def list_projects(data_dir: Path | str) -> list[ProjectManifest]:
    data_dir = Path(data_dir)
    out = []
    if not data_dir.is_dir():
        return out
    for child in sorted(data_dir.iterdir()):
        if (child / MANIFEST_NAME).is_file():
            try:
                out.append(ProjectManifest.from_json(
                    json.loads((child / MANIFEST_NAME).read_text())))
            except (json.JSONDecodeError, KeyError, ValueError):
                logger.warning("skipping unreadable manifest in %s", child)
    return out


# -- export / ground-truth serialization ---------------------------------------


def export_payload(project: Project, status: Sequence[FrameStatus],
                   annotations: dict[int, SoundingAnnotation]) -> dict[str, Any]:
    """Session result in the canonical interchange shape (also used for GT)."""
    frames = []
    for i in range(project.manifest.n_frames):
        ann = annotations.get(i)
        frames.append({
            "index": i,
            "status": status[i].value,
            "items": [it.to_json() for it in ann.items] if ann else [],
        })
    return {
        "version": 1,
        "project": project.name,
        "fps": project.fps,
        "n_frames": project.manifest.n_frames,
        "frames": frames,
    }


def write_annotation_file(path: Path | str, payload: dict[str, Any]) -> None:
    Path(path).write_text(canonical_json(payload) + "\n")


def load_annotation_file(path: Path | str) -> dict[int, SoundingAnnotation]:
    """Read an export-shaped file into per-frame annotations (empty frames skipped)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise StoreError(f"cannot read annotation file {path}: {exc}") from exc
    out: dict[int, SoundingAnnotation] = {}
    for entry in payload.get("frames", []):
        idx = int(entry["index"])
        items = entry.get("items", [])
        if items or entry.get("status") not in (None, "unannotated"):
            out[idx] = SoundingAnnotation.from_json({"frame_index": idx, "items": items})
    return out


def load_status_file(path: Path | str) -> list[FrameStatus]:
    payload = json.loads(Path(path).read_text())
    return [FrameStatus(entry.get("status", "unannotated")) for entry in payload["frames"]]


# -- operation log --------------------------------------------------------------


def _record_checksum(record: dict[str, Any]) -> str:
    body = {k: v for k, v in record.items() if k != "checksum"}
    return hashlib.sha256(canonical_json(body).encode()).hexdigest()


@dataclass
class OperationLog:
    """Append-only JSONL log with per-record SHA-256 integrity checksums."""

    path: Path
    next_seq: int = 0

    def __post_init__(self) -> None:
        self.path = Path(self.path)

    def append(self, op: str, payload: dict[str, Any], actor: str = "human") -> dict[str, Any]:
        if op not in LOG_OPS:
            raise ValueError(f"unknown op {op!r}; expected one of {LOG_OPS}")
        record = {
            "seq": self.next_seq,
            "ts": time.time(),
            "actor": actor,
            "op": op,
            "payload": payload,
        }
        record["checksum"] = _record_checksum(record)
        with self.path.open("a") as fh:
            fh.write(canonical_json(record) + "\n")
        self.next_seq += 1
        return record

    def read_all(self) -> list[dict[str, Any]]:
        """Read and verify every record; fail loudly at the first bad one."""
        if not self.path.is_file():
            return []
        records: list[dict[str, Any]] = []
        last_good = -1
        for lineno, line in enumerate(self.path.read_text().splitlines()):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError(
                    f"operation log corrupt at line {lineno + 1} "
                    f"(last valid seq {last_good}): {exc}"
                ) from exc
            if record.get("checksum") != _record_checksum(record):
                raise StoreError(
                    f"operation log checksum mismatch at seq {record.get('seq')} "
                    f"(last valid seq {last_good})"
                )
            if record.get("seq") != last_good + 1:
                raise StoreError(
                    f"operation log sequence gap: expected {last_good + 1}, "
                    f"got {record.get('seq')}"
                )
            records.append(record)
            last_good = record["seq"]
        self.next_seq = last_good + 1
        return records

    def __iter__(self) -> Iterator[dict[str, Any]]:
        return iter(self.read_all())


# -- session persistence ---------------------------------------------------------


@dataclass
class SessionMeta:
    session_id: str
    project: str
    created: str
    policy: MatchPolicy = field(default_factory=MatchPolicy)
    actor: str = "human"

    def to_json(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "project": self.project,
            "created": self.created,
            "policy": self.policy.to_json(),
            "actor": self.actor,
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "SessionMeta":
        return SessionMeta(
            session_id=str(obj["session_id"]),
            project=str(obj["project"]),
            created=str(obj.get("created", "")),
            policy=MatchPolicy.from_json(obj.get("policy", {})),
            actor=str(obj.get("actor", "human")),
        )


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


def session_dir(project: Project, session_id: str) -> Path:
    return project.sessions_root() / session_id


def create_session_dir(project: Project, session_id: str | None = None,
                       policy: MatchPolicy | None = None,
                       actor: str = "human") -> SessionMeta:
    sid = session_id or new_session_id()
    directory = session_dir(project, sid)
    if directory.exists():
        raise StoreError(f"session {sid} already exists")
    directory.mkdir(parents=True)
    meta = SessionMeta(
        session_id=sid,
        project=project.name,
        created=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        policy=policy or MatchPolicy(),
        actor=actor,
    )
    (directory / "session.json").write_text(json.dumps(meta.to_json(), indent=2) + "\n")
    return meta


def load_session_meta(project: Project, session_id: str) -> SessionMeta:
    path = session_dir(project, session_id) / "session.json"
    if not path.is_file():
        raise StoreError(f"no such session: {session_id}")
    try:
        return SessionMeta.from_json(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise StoreError(f"corrupt session.json for {session_id}: {exc}") from exc


def session_lock(project: Project, session_id: str) -> FileLock:
    return FileLock(str(session_dir(project, session_id) / "lock"))
