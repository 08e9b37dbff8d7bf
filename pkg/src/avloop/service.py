"""REST service for the annotation loop.

All state mutations go through :class:`~avloop.session.Session`, so a browser
client, the CLI, and the scripted annotator see exactly the same behavior.
GET endpoints never change state; "Move To" navigation is a POST because the
jump itself is recorded in the session log.

Routes live under ``/api/v1``. Error mapping: unknown ids are 404, malformed
annotations are 422, revision conflicts and stepping past the last frame are
409.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse

from .model import FrameStatus, MatchPolicy, SoundingAnnotation
from .session import Session
from .store import Project, StoreError, list_projects, load_project

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
DEFAULT_DATA_DIR = os.environ.get("AVLOOP_DATA_DIR", "data")


def create_app(data_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="avloop", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    root = Path(data_dir or DEFAULT_DATA_DIR)
    projects: dict[str, Project] = {}
    sessions: dict[str, Session] = {}

    # -- lookup helpers -------------------------------------------------------

    def get_project(pid: str) -> Project:
        if pid not in projects:
            path = root / pid
            try:
                projects[pid] = load_project(path)
            except StoreError as exc:
                raise HTTPException(404, f"no such project: {pid}") from exc
        return projects[pid]

    def get_session(sid: str) -> Session:
        if sid not in sessions:
            for manifest in list_projects(root):
                project = get_project(manifest.name)
                if sid in project.session_ids():
                    sessions[sid] = Session.open(project, sid)
                    break
            else:
                raise HTTPException(404, f"no such session: {sid}")
        return sessions[sid]

    def check_frame(project: Project, n: int) -> None:
        if not 0 <= n < project.manifest.n_frames:
            raise HTTPException(404, f"frame {n} out of range")

    def parse_annotation(payload: dict, frame: int) -> SoundingAnnotation:
        try:
            ann = SoundingAnnotation.from_json(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"malformed annotation: {exc}") from exc
        if ann.frame_index != frame:
            raise HTTPException(422, "annotation frame_index does not match URL frame")
        return ann

    def check_revision(session: Session, body: dict) -> None:
        expected = body.get("revision")
        if expected is not None and int(expected) != session.revision:
            raise HTTPException(
                409, f"revision conflict: expected {session.revision}, got {expected}"
            )

    # -- projects and sessions ------------------------------------------------

    @app.get(f"{API_PREFIX}/projects")
    def projects_index() -> list[dict]:
        out = []
        for manifest in list_projects(root):
            project = get_project(manifest.name)
            out.append({**manifest.to_json(), "sessions": project.session_ids()})
        return out

    @app.post(f"{API_PREFIX}/projects/{{pid}}/sessions", status_code=201)
    def create_session(pid: str, body: dict = Body(default={})) -> dict:
        project = get_project(pid)
        policy = MatchPolicy.from_json(body["policy"]) if body.get("policy") else None
        try:
            session = Session.create(
                project,
                session_id=body.get("session_id"),
                policy=policy,
                actor=body.get("actor", "human"),
            )
        except StoreError as exc:
            raise HTTPException(409, str(exc)) from exc
        sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "project": pid,
            "n_frames": session.state.n_frames,
            "pending": session.pending_frame(),
            "revision": session.revision,
        }

    # -- frame workflow ---------------------------------------------------------

    @app.get(f"{API_PREFIX}/sessions/{{sid}}/frames/{{n}}")
    def frame_bundle(sid: str, n: int) -> dict:
        session = get_session(sid)
        check_frame(session.project, n)
        return session.frame_bundle(n)

    @app.put(f"{API_PREFIX}/sessions/{{sid}}/frames/{{n}}/annotation")
    def put_annotation(sid: str, n: int, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        check_frame(session.project, n)
        check_revision(session, body)
        ann = parse_annotation(body.get("annotation", {}), n)
        return session.annotate(n, ann).to_json()

    @app.post(f"{API_PREFIX}/sessions/{{sid}}/next")
    def preempt_next(sid: str) -> dict:
        session = get_session(sid)
        try:
            frame, prediction = session.preempt_next()
        except ValueError as exc:
            raise HTTPException(409, str(exc)) from exc
        return {"frame": frame, "prediction": prediction.to_json(),
                "revision": session.revision}

    @app.post(f"{API_PREFIX}/sessions/{{sid}}/next/confirm")
    def confirm_next(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        frame = int(body.get("frame", -1))
        check_frame(session.project, frame)
        check_revision(session, body)
        ann = parse_annotation(body.get("annotation", {}), frame)
        try:
            result = session.confirm_preempt(frame, ann, bool(body.get("modified")))
        except ValueError as exc:
            raise HTTPException(409, str(exc)) from exc
        return result.to_json()

    @app.post(f"{API_PREFIX}/sessions/{{sid}}/navigate")
    def navigate(sid: str, body: dict = Body(...)) -> dict:
        session = get_session(sid)
        frame = int(body.get("frame", -1))
        check_frame(session.project, frame)
        session.navigate(frame)
        return {"frame": frame, "revision": session.revision}

    # -- review ------------------------------------------------------------------

    @app.get(f"{API_PREFIX}/sessions/{{sid}}/review/thumbnails")
    def thumbnails(sid: str) -> list[dict]:
        session = get_session(sid)
        pid = session.project.name
        return [
            {
                "frame": i,
                "status": status.value,
                "warning": status == FrameStatus.SKIPPED_AUDIO_GATE,
                "image_url": f"{API_PREFIX}/projects/{pid}/frames/{i}/image",
            }
            for i, status in enumerate(session.state.status)
        ]

    @app.get(f"{API_PREFIX}/sessions/{{sid}}/review/playback")
    def playback(sid: str) -> dict:
        session = get_session(sid)
        pid = session.project.name
        frames = []
        for i, status in enumerate(session.state.status):
            ann = session.current_annotation(i)
            frames.append({
                "frame": i,
                "status": status.value,
                "image_url": f"{API_PREFIX}/projects/{pid}/frames/{i}/image",
                "items": [it.to_json() for it in ann.items] if ann else [],
            })
        return {"fps": session.project.fps, "frames": frames}

    @app.get(f"{API_PREFIX}/sessions/{{sid}}/stats")
    def stats(sid: str) -> dict:
        result = get_session(sid).stats()
        return {**result.to_json(), "automation_fraction": result.automation_fraction}

    @app.get(f"{API_PREFIX}/sessions/{{sid}}/export")
    def export(sid: str) -> dict:
        return get_session(sid).export()

    # -- media ---------------------------------------------------------------------

    @app.get(f"{API_PREFIX}/projects/{{pid}}/frames/{{n}}/image")
    def frame_image(pid: str, n: int) -> FileResponse:
        project = get_project(pid)
        check_frame(project, n)
        return FileResponse(project.image_path(n), media_type="image/png")

    @app.get(f"{API_PREFIX}/projects/{{pid}}/frames/{{n}}/audio")
    def frame_audio(pid: str, n: int) -> FileResponse:
        project = get_project(pid)
        check_frame(project, n)
        return FileResponse(project.audio_path(n), media_type="audio/wav")

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    return app


def serve(data_dir: Path | str | None = None, port: int | None = None,
          host: str = "127.0.0.1") -> None:
    """Run the API with uvicorn (blocking)."""
    import uvicorn

    port = port or int(os.environ.get("AVLOOP_PORT", "8080"))
    uvicorn.run(create_app(data_dir), host=host, port=port)
