import pytest
from fastapi.testclient import TestClient

from conftest import gate_project
from avloop.model import (
    AnnotationItem,
    BoundingBox,
    DetectedObject,
    SoundingAnnotation,
    annotation_content_key,
)
from avloop.service import create_app
from avloop.simulate import (
    SimAnnotator,
    SimPolicy,
    run_simulation,
    run_simulation_http,
)
from avloop.store import canonical_json


class TestSimPolicy:
    def test_perfect_rejects_noise_knobs(self):
        with pytest.raises(ValueError, match="noise"):
            SimPolicy(mode="perfect", box_jitter_px=1.0)
        with pytest.raises(ValueError, match="noise"):
            SimPolicy(mode="perfect", wrong_pick_prob=0.1)

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="unknown sim mode"):
            SimPolicy(mode="sloppy")

    def test_noisy_builder(self):
        policy = SimPolicy.noisy(3.0, 0.1, seed=5)
        assert policy.mode == "noisy"
        assert policy.box_jitter_px == 3.0
        assert policy.wrong_pick_prob == 0.1
        assert policy.seed == 5


class TestSimAnnotator:
    truth_box = BoundingBox(10, 10, 20, 15)

    def _truth(self):
        item = AnnotationItem(box=self.truth_box, sound_label="dog")
        return {0: SoundingAnnotation(frame_index=0, items=(item,))}

    def test_picks_matching_detection(self):
        annotator = SimAnnotator(self._truth(), SimPolicy())
        det = DetectedObject(3, self.truth_box, "dog", 0.9)
        ann = annotator.annotation_for(0, (det,))
        assert ann.items[0].detection_id == 3
        assert ann.items[0].box == self.truth_box

    def test_hand_draws_when_no_detection_close_enough(self):
        annotator = SimAnnotator(self._truth(), SimPolicy())
        far = DetectedObject(0, BoundingBox(50, 50, 10, 10), "dog", 0.9)
        ann = annotator.annotation_for(0, (far,))
        assert ann.items[0].detection_id is None
        assert ann.items[0].box == self.truth_box

    def test_wrong_pick_takes_other_detection(self):
        annotator = SimAnnotator(self._truth(), SimPolicy.noisy(0.0, 1.0, seed=1))
        right = DetectedObject(0, self.truth_box, "dog", 0.97)
        wrong = DetectedObject(1, BoundingBox(50, 50, 10, 10), "cat", 0.4)
        ann = annotator.annotation_for(0, (right, wrong))
        assert ann.items[0].detection_id == 1

    def test_perfect_mode_never_jitters(self):
        annotator = SimAnnotator(self._truth(), SimPolicy())
        ann = annotator.annotation_for(0, (), hand_drawn_only=True)
        assert ann.items[0].box == self.truth_box

    def test_noisy_jitter_moves_hand_drawn_boxes(self):
        annotator = SimAnnotator(self._truth(), SimPolicy.noisy(4.0, 0.0, seed=3))
        ann = annotator.annotation_for(0, (), hand_drawn_only=True)
        assert ann.items[0].box != self.truth_box

    def test_frames_without_truth_yield_empty_annotation(self):
        annotator = SimAnnotator({}, SimPolicy())
        assert annotator.annotation_for(7, ()).items == ()


class TestRunSimulation:
    def test_perfect_run_matches_truth_everywhere(self, tmp_synth_project):
        report = run_simulation(tmp_synth_project, SimPolicy())
        truth = tmp_synth_project.ground_truth()
        by_index = {f["index"]: f for f in report.export["frames"]}
        for i, gt in truth.items():
            got = SoundingAnnotation.from_json(
                {"frame_index": i, "items": by_index[i]["items"]})
            assert annotation_content_key(got) == annotation_content_key(gt)
        assert report.human_frames < tmp_synth_project.manifest.n_frames / 2

    def test_report_shape(self, tmp_synth_project):
        report = run_simulation(tmp_synth_project, SimPolicy())
        assert report.steps == report.human_frames
        payload = report.to_json()
        assert payload == {"session_id": report.session_id,
                           "steps": report.steps,
                           "human_frames": report.human_frames}

    def test_manual_mode_reproduces_ground_truth_bytes(self, tmp_synth_project):
        report = run_simulation(tmp_synth_project, SimPolicy(), manual=True)
        on_disk = (tmp_synth_project.root / "ground_truth.json").read_text()
        assert canonical_json(report.export) + "\n" == on_disk
        assert report.steps == tmp_synth_project.manifest.n_frames

    def test_same_seed_same_noisy_export(self, tmp_synth_project):
        a = run_simulation(tmp_synth_project, SimPolicy.noisy(2.0, 0.05, seed=9))
        b = run_simulation(tmp_synth_project, SimPolicy.noisy(2.0, 0.05, seed=9))
        assert canonical_json(a.export) == canonical_json(b.export)
        assert a.session_id != b.session_id

    def test_gate_project_skips_contradicted_frames(self, tmp_gate_project):
        report = run_simulation(tmp_gate_project, SimPolicy())
        statuses = [f["status"] for f in report.export["frames"]]
        assert [i for i, s in enumerate(statuses) if s == "skipped_audio_gate"] == [3, 4]
        assert report.human_frames == 4

    def test_step_limit_guard(self, tmp_gate_project):
        with pytest.raises(RuntimeError, match="exceeded"):
            run_simulation(tmp_gate_project, SimPolicy(), max_steps=2)

    def test_requires_ground_truth(self, tmp_path):
        det = [{"index": 0, "objects": []}]
        tags = [{"index": 0, "tags": []}]
        from conftest import build_disk_project

        project = build_disk_project(tmp_path / "bare", det, tags, 1)
        with pytest.raises(ValueError, match="ground_truth"):
            run_simulation(project, SimPolicy())


class TestHttpDriverParity:
    @pytest.fixture
    def setup(self, tmp_path):
        project = gate_project(tmp_path / "gate")
        app = create_app(tmp_path)
        with TestClient(app) as client:
            yield project, client

    def test_http_matches_engine_direct(self, setup):
        project, client = setup
        policy = SimPolicy.noisy(1.5, 0.0, seed=21)
        direct = run_simulation(project, policy)
        over_http = run_simulation_http(client, "gate", project.ground_truth(), policy)
        assert canonical_json(direct.export) == canonical_json(over_http.export)
        assert direct.steps == over_http.steps
        assert direct.human_frames == over_http.human_frames

    def test_http_manual_parity(self, setup):
        project, client = setup
        direct = run_simulation(project, SimPolicy(), manual=True)
        over_http = run_simulation_http(client, "gate", project.ground_truth(),
                                        SimPolicy(), manual=True)
        assert canonical_json(direct.export) == canonical_json(over_http.export)
