"""Session log/replay behavior plus the REST surface on top of it."""

import pytest
from fastapi.testclient import TestClient

from conftest import gate_project
from avloop.model import AnnotationItem, BoundingBox, FrameStatus, SoundingAnnotation
from avloop.service import create_app
from avloop.session import Session
from avloop.store import StoreError, canonical_json


def dog_annotation(frame: int, detection_id: int | None = 0) -> SoundingAnnotation:
    item = AnnotationItem(box=BoundingBox(10, 10, 20, 15), sound_label="dog",
                          detection_id=detection_id)
    return SoundingAnnotation(frame_index=frame, items=(item,))


def drive_gate(session: Session) -> list[int]:
    answered = []
    while session.pending_frame() is not None:
        frame = session.pending_frame()
        answered.append(frame)
        session.annotate(frame, dog_annotation(frame))
        if len(answered) > 20:
            raise AssertionError("gate session did not terminate")
    return answered


GATE_STATUSES = ["human", "auto", "human", "skipped_audio_gate",
                 "skipped_audio_gate", "human", "auto", "human"]


class TestSessionLifecycle:
    def test_create_starts_at_frame_zero(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        assert session.pending_frame() == 0
        assert session.revision == 0
        assert len(session.session_id) == 12

    def test_annotate_returns_result_and_bumps_revision(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        result = session.annotate(0, dog_annotation(0))
        assert result.frame == 0
        assert result.status == FrameStatus.HUMAN
        assert result.decision.frame == 2
        assert result.revision == session.revision > 0

    def test_full_run_statuses(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        assert drive_gate(session) == [0, 2, 5, 7]
        assert [s.value for s in session.state.status] == GATE_STATUSES

    def test_log_op_vocabulary(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        drive_gate(session)
        # Off-schedule edit of an auto frame is a "modify", not an "annotate".
        session.annotate(1, dog_annotation(1, detection_id=None))
        session.navigate(3)
        ops = [r["op"] for r in session.log.read_all()]
        assert ops.count("annotate") == 4
        assert ops.count("modify") == 1
        assert ops.count("navigate") == 1
        assert set(ops) <= {"annotate", "modify", "populate", "skip", "navigate"}

    def test_populate_and_skip_records(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        drive_gate(session)
        records = session.log.read_all()
        populates = [r["payload"] for r in records if r["op"] == "populate"]
        skips = [r["payload"] for r in records if r["op"] == "skip"]
        assert [p["ranges"] for p in populates] == [[[0, 2]], [[2, 5]], [[5, 7]]]
        assert [p["filled"] for p in populates] == [[1], [], [6]]
        assert [(s["frame"], s["reason"]) for s in skips] == [
            (3, "audio-gate"), (4, "audio-gate")]
        assert all(r["actor"] == "system" for r in records
                   if r["op"] in ("populate", "skip"))

    def test_reads_do_not_touch_the_log(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        session.annotate(0, dog_annotation(0))
        before = session.revision
        session.frame_bundle(1)
        session.stats()
        session.export()
        session.ranked_candidates(0)
        assert session.revision == before

    def test_navigate_rejects_out_of_range(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        with pytest.raises(IndexError):
            session.navigate(99)

    def test_stats_after_full_run(self, tmp_gate_project):
        session = Session.create(tmp_gate_project)
        drive_gate(session)
        stats = session.stats()
        assert stats.manual_count == 4
        assert stats.auto_count == 2
        assert stats.skipped_count == 2
        # Skipped frames carry no annotation, so they score zero against truth.
        assert stats.mean_ciou == pytest.approx(6 / 8)

    def test_open_unknown_session(self, tmp_gate_project):
        with pytest.raises(StoreError):
            Session.open(tmp_gate_project, "nope")


class TestReplay:
    def test_reopen_restores_everything(self, tmp_gate_project):
        live = Session.create(tmp_gate_project)
        drive_gate(live)
        live.annotate(1, dog_annotation(1, detection_id=None))
        reopened = Session.open(tmp_gate_project, live.session_id)
        assert reopened.state.status == live.state.status
        assert reopened.state.annotations == live.state.annotations
        assert reopened.state.pending == live.state.pending
        assert reopened.revision == live.revision
        assert canonical_json(reopened.export()) == canonical_json(live.export())

    def test_reopen_restores_reranker(self, tmp_gate_project):
        live = Session.create(tmp_gate_project)
        drive_gate(live)
        reopened = Session.open(tmp_gate_project, live.session_id)
        assert reopened.reranker.to_json() == live.reranker.to_json()
        assert live.reranker.counts  # learned something det-backed

    def test_replay_is_idempotent(self, tmp_gate_project):
        live = Session.create(tmp_gate_project)
        drive_gate(live)
        once = Session.open(tmp_gate_project, live.session_id)
        twice = Session.open(tmp_gate_project, live.session_id)
        assert canonical_json(once.export()) == canonical_json(twice.export())
        assert once.state.status == twice.state.status

    def test_confirmations_replay(self, tmp_gate_project):
        live = Session.create(tmp_gate_project)
        live.annotate(0, dog_annotation(0))
        frame, prediction = live.preempt_next()
        assert frame == 1
        live.confirm_preempt(frame, prediction)
        reopened = Session.open(tmp_gate_project, live.session_id)
        assert reopened.state.status[1] == FrameStatus.AUTO
        assert reopened.state.current == 1
        assert reopened.state.annotations[1] == live.state.annotations[1]

    def test_modified_confirmation_replays_as_auto_modified(self, tmp_gate_project):
        live = Session.create(tmp_gate_project)
        live.annotate(0, dog_annotation(0))
        frame, _ = live.preempt_next()
        tweaked = dog_annotation(frame, detection_id=None)
        live.confirm_preempt(frame, tweaked, modified=True)
        reopened = Session.open(tmp_gate_project, live.session_id)
        assert reopened.state.status[1] == FrameStatus.AUTO_MODIFIED
        assert reopened.state.annotations[1].items[0].detection_id is None


# -- REST surface -----------------------------------------------------------------


@pytest.fixture
def client(tmp_path):
    gate_project(tmp_path / "gate")
    app = create_app(tmp_path)
    with TestClient(app) as c:
        yield c


def make_session(client, project="gate", **body) -> dict:
    resp = client.post(f"/api/v1/projects/{project}/sessions", json=body)
    assert resp.status_code == 201
    return resp.json()


def put_annotation(client, sid: str, frame: int, annotation=None, **extra):
    ann = annotation or dog_annotation(frame).to_json()
    return client.put(f"/api/v1/sessions/{sid}/frames/{frame}/annotation",
                      json={"annotation": ann, **extra})


class TestServiceBasics:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.text == "ok"

    def test_projects_index(self, client):
        resp = client.get("/api/v1/projects")
        assert resp.status_code == 200
        (entry,) = resp.json()
        assert entry["name"] == "gate"
        assert entry["n_frames"] == 8
        assert entry["sessions"] == []

    def test_create_session_payload(self, client):
        created = make_session(client)
        assert created["project"] == "gate"
        assert created["n_frames"] == 8
        assert created["pending"] == 0
        assert created["revision"] == 0
        index = client.get("/api/v1/projects").json()
        assert created["session_id"] in index[0]["sessions"]

    def test_unknown_project_404(self, client):
        assert client.post("/api/v1/projects/nope/sessions", json={}).status_code == 404
        assert client.get("/api/v1/sessions/nope/frames/0").status_code == 404

    def test_duplicate_session_id_409(self, client):
        make_session(client, session_id="twin")
        resp = client.post("/api/v1/projects/gate/sessions",
                           json={"session_id": "twin"})
        assert resp.status_code == 409

    def test_media_endpoints(self, client):
        image = client.get("/api/v1/projects/gate/frames/0/image")
        audio = client.get("/api/v1/projects/gate/frames/0/audio")
        assert image.status_code == 200
        assert image.headers["content-type"] == "image/png"
        assert image.content[:8] == b"\x89PNG\r\n\x1a\n"
        assert audio.status_code == 200
        assert audio.content[:4] == b"RIFF"
        assert client.get("/api/v1/projects/gate/frames/99/image").status_code == 404


class TestFrameWorkflow:
    def test_frame_bundle_shape(self, client):
        sid = make_session(client)["session_id"]
        bundle = client.get(f"/api/v1/sessions/{sid}/frames/0").json()
        assert bundle["frame"] == 0
        assert bundle["timestamp_ms"] == 0
        assert bundle["status"] == "unannotated"
        assert bundle["pending"] == 0
        assert bundle["revision"] == 0
        assert bundle["current_annotation"] is None
        assert bundle["image_url"] == "/api/v1/projects/gate/frames/0/image"
        (cand,) = bundle["candidates"]
        assert cand == {"id": 0, "box": {"x": 10.0, "y": 10.0, "w": 20.0, "h": 15.0},
                        "label": "dog", "confidence": 0.95}
        assert bundle["audio_tags"] == [{"label": "dog", "confidence": 0.9}]

    def test_put_walks_the_whole_clip(self, client):
        sid = make_session(client)["session_id"]
        pending, decisions = 0, []
        while pending is not None:
            result = put_annotation(client, sid, pending)
            assert result.status_code == 200
            body = result.json()
            assert body["frame"] == pending
            decisions.append(body["decision"])
            pending = body["decision"]["frame"]
        assert [d["frame"] for d in decisions] == [2, 5, 7, None]
        assert decisions[-1]["kind"] == "done"
        assert decisions[1]["populated"] == [[0, 2]]
        statuses = [f["status"] for f in
                    client.get(f"/api/v1/sessions/{sid}/export").json()["frames"]]
        assert statuses == GATE_STATUSES

    def test_put_rejects_frame_mismatch(self, client):
        sid = make_session(client)["session_id"]
        resp = put_annotation(client, sid, 0, annotation=dog_annotation(3).to_json())
        assert resp.status_code == 422

    def test_put_rejects_malformed_annotation(self, client):
        sid = make_session(client)["session_id"]
        bad = {"frame_index": 0, "items": [{"box": {"x": 1, "y": 2, "w": 3},
                                            "sound_label": "dog"}]}
        assert put_annotation(client, sid, 0, annotation=bad).status_code == 422
        resp = client.put(f"/api/v1/sessions/{sid}/frames/0/annotation", json={})
        assert resp.status_code == 422

    def test_put_rejects_negative_box(self, client):
        sid = make_session(client)["session_id"]
        bad = {"frame_index": 0, "items": [
            {"box": {"x": 1, "y": 2, "w": -3, "h": 4}, "sound_label": "dog"}]}
        assert put_annotation(client, sid, 0, annotation=bad).status_code == 422

    def test_stale_revision_conflict(self, client):
        sid = make_session(client)["session_id"]
        assert put_annotation(client, sid, 0, revision=0).status_code == 200
        resp = put_annotation(client, sid, 2, revision=0)
        assert resp.status_code == 409
        assert "revision conflict" in resp.json()["detail"]

    def test_frame_out_of_range_404(self, client):
        sid = make_session(client)["session_id"]
        assert client.get(f"/api/v1/sessions/{sid}/frames/99").status_code == 404
        assert put_annotation(client, sid, 99).status_code == 404

    def test_navigate_logged(self, client):
        sid = make_session(client)["session_id"]
        resp = client.post(f"/api/v1/sessions/{sid}/navigate", json={"frame": 5})
        assert resp.status_code == 200
        assert resp.json() == {"frame": 5, "revision": 1}
        assert client.post(f"/api/v1/sessions/{sid}/navigate",
                           json={"frame": 99}).status_code == 404


class TestPreemptFlow:
    def test_next_before_any_annotation_409(self, client):
        sid = make_session(client)["session_id"]
        assert client.post(f"/api/v1/sessions/{sid}/next").status_code == 409

    def test_next_then_confirm(self, client):
        sid = make_session(client)["session_id"]
        put_annotation(client, sid, 0)
        nxt = client.post(f"/api/v1/sessions/{sid}/next")
        assert nxt.status_code == 200
        body = nxt.json()
        assert body["frame"] == 1
        assert body["prediction"]["frame_index"] == 1
        confirm = client.post(f"/api/v1/sessions/{sid}/next/confirm",
                              json={"frame": 1, "annotation": body["prediction"]})
        assert confirm.status_code == 200
        assert confirm.json()["status"] == "auto"
        bundle = client.get(f"/api/v1/sessions/{sid}/frames/1").json()
        assert bundle["status"] == "auto"

    def test_confirm_wrong_frame_409(self, client):
        sid = make_session(client)["session_id"]
        put_annotation(client, sid, 0)
        resp = client.post(f"/api/v1/sessions/{sid}/next/confirm",
                           json={"frame": 5, "annotation": dog_annotation(5).to_json()})
        assert resp.status_code == 409

    def test_next_at_end_of_video_409(self, client):
        sid = make_session(client)["session_id"]
        put_annotation(client, sid, 0)
        for frame in range(1, 8):
            nxt = client.post(f"/api/v1/sessions/{sid}/next").json()
            client.post(f"/api/v1/sessions/{sid}/next/confirm",
                        json={"frame": frame, "annotation": nxt["prediction"]})
        resp = client.post(f"/api/v1/sessions/{sid}/next")
        assert resp.status_code == 409
        assert "end of video" in resp.json()["detail"]


class TestReviewEndpoints:
    def _finished(self, client) -> str:
        sid = make_session(client)["session_id"]
        pending = 0
        while pending is not None:
            pending = put_annotation(client, sid, pending).json()["decision"]["frame"]
        return sid

    def test_thumbnails_flag_gate_skips(self, client):
        sid = self._finished(client)
        thumbs = client.get(f"/api/v1/sessions/{sid}/review/thumbnails").json()
        assert [t["status"] for t in thumbs] == GATE_STATUSES
        assert [t["frame"] for t in thumbs if t["warning"]] == [3, 4]
        assert thumbs[0]["image_url"].endswith("/projects/gate/frames/0/image")

    def test_playback_shape(self, client):
        sid = self._finished(client)
        playback = client.get(f"/api/v1/sessions/{sid}/review/playback").json()
        assert playback["fps"] == 8
        assert len(playback["frames"]) == 8
        annotated = playback["frames"][0]
        assert annotated["items"][0]["sound_label"] == "dog"
        skipped = playback["frames"][3]
        assert skipped["items"] == []

    def test_stats_endpoint(self, client):
        sid = self._finished(client)
        stats = client.get(f"/api/v1/sessions/{sid}/stats").json()
        assert stats["n_frames"] == 8
        assert stats["manual_count"] == 4
        assert stats["automation_fraction"] == pytest.approx(2 / 8)

    def test_export_matches_session_object(self, client, tmp_path):
        sid = self._finished(client)
        from avloop.store import load_project

        project = load_project(tmp_path / "gate")
        session = Session.open(project, sid)
        http_export = client.get(f"/api/v1/sessions/{sid}/export").json()
        assert canonical_json(http_export) == canonical_json(session.export())


class TestServiceSessionRecovery:
    def test_fresh_app_reopens_existing_session(self, tmp_path):
        gate_project(tmp_path / "gate")
        with TestClient(create_app(tmp_path)) as first:
            sid = make_session(first)["session_id"]
            put_annotation(first, sid, 0)
        with TestClient(create_app(tmp_path)) as second:
            bundle = second.get(f"/api/v1/sessions/{sid}/frames/0")
            assert bundle.status_code == 200
            assert bundle.json()["status"] == "human"
            assert bundle.json()["pending"] == 2
