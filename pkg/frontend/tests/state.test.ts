import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotateSession } from "../src/state.js";
import type { Candidate, FrameBundle } from "../src/types.js";

interface Call {
  method: string;
  url: string;
  body: unknown;
}

/**
 * In-memory stand-in for the HTTP service: canned bundles plus a call log,
 * so tests can assert that each UI action issues exactly one request.
 */
class FakeBackend {
  calls: Call[] = [];
  bundles = new Map<number, FrameBundle>();
  revision = 0;
  saveResponse: {
    frame: number;
    status: string;
    decision: { kind: "annotate_frame" | "done"; frame: number | null; populated: number[][] };
    revision: number;
  } = {
    frame: 0,
    status: "human",
    decision: { kind: "annotate_frame", frame: 2, populated: [] },
    revision: 1,
  };

  bundle(frame: number, extra: Partial<FrameBundle> = {}): FrameBundle {
    return {
      frame,
      timestamp_ms: frame * 125,
      image_url: `/api/v1/projects/proj/frames/${frame}/image`,
      audio_url: `/api/v1/projects/proj/frames/${frame}/audio`,
      status: "unannotated",
      pending: 0,
      candidates: [],
      audio_tags: [{ label: "dog", confidence: 0.9 }],
      current_annotation: null,
      revision: this.revision,
      ...extra,
    };
  }

  fetchFn = async (input: string | URL | Request, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ method, url, body });

    const json = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), { status });

    if (method === "POST" && url.endsWith("/projects/proj/sessions")) {
      return json(201, {
        session_id: "s1",
        project: "proj",
        n_frames: 3,
        pending: 0,
        revision: this.revision,
      });
    }
    const frameMatch = url.match(/\/sessions\/s1\/frames\/(\d+)$/);
    if (method === "GET" && frameMatch) {
      const frame = Number(frameMatch[1]);
      return json(200, this.bundles.get(frame) ?? this.bundle(frame));
    }
    if (method === "PUT" && url.includes("/annotation")) {
      this.revision += 1;
      return json(200, { ...this.saveResponse, revision: this.revision });
    }
    if (method === "POST" && url.endsWith("/next")) {
      this.revision += 1;
      return json(200, {
        frame: 1,
        prediction: {
          frame_index: 1,
          items: [{ box: { x: 10, y: 10, w: 20, h: 15 }, sound_label: "dog", detection_id: 0 }],
        },
        revision: this.revision,
      });
    }
    if (method === "POST" && url.endsWith("/next/confirm")) {
      this.revision += 1;
      return json(200, {
        frame: 1,
        status: body?.modified ? "auto_modified" : "auto",
        decision: { kind: "annotate_frame", frame: 2, populated: [] },
        revision: this.revision,
      });
    }
    if (method === "POST" && url.endsWith("/navigate")) {
      this.revision += 1;
      return json(200, { frame: body?.frame ?? 0, revision: this.revision });
    }
    return json(404, { detail: `no fake route for ${method} ${url}` });
  };
}

const CAND: Candidate = {
  id: 0,
  box: { x: 10, y: 10, w: 20, h: 15 },
  label: "dog",
  confidence: 0.95,
};

describe("AnnotateSession", () => {
  let backend: FakeBackend;
  let session: AnnotateSession;

  beforeEach(async () => {
    backend = new FakeBackend();
    const api = new ApiClient("http://h", backend.fetchFn);
    session = await AnnotateSession.create(api, "proj");
  });

  it("creates the session then loads the pending frame - two calls, no more", () => {
    expect(backend.calls.map((c) => c.method)).toEqual(["POST", "GET"]);
    expect(session.frame).toBe(0);
    expect(session.nFrames).toBe(3);
    expect(session.staged).toEqual([]);
  });

  it("prefills the staging area from the server's current annotation", async () => {
    backend.bundles.set(
      1,
      backend.bundle(1, {
        status: "auto",
        current_annotation: {
          frame_index: 1,
          items: [{ box: { x: 1, y: 2, w: 3, h: 4 }, sound_label: "dog", detection_id: 0 }],
        },
      }),
    );
    await session.load(1);
    expect(session.staged).toEqual([
      { box: { x: 1, y: 2, w: 3, h: 4 }, sound_label: "dog", detection_id: 0 },
    ]);
  });

  it("stages a candidate once, updating in place on re-select", () => {
    session.stageCandidate(CAND, "dog");
    session.stageCandidate(CAND, "music");
    expect(session.staged).toHaveLength(1);
    expect(session.staged[0]?.sound_label).toBe("music");
    expect(session.staged[0]?.detection_id).toBe(0);
    // Staging is purely local until save: no extra requests.
    expect(backend.calls).toHaveLength(2);
  });

  it("rejects degenerate custom boxes before they reach the wire", () => {
    expect(session.stageCustomBox({ x: 5, y: 5, w: 0, h: 10 }, "dog")).toBe(false);
    expect(session.stageCustomBox({ x: 5, y: 5, w: -4, h: 10 }, "dog")).toBe(false);
    expect(session.staged).toEqual([]);
    expect(backend.calls).toHaveLength(2);
  });

  it("stages valid custom boxes without a detection id", () => {
    expect(session.stageCustomBox({ x: 5, y: 5, w: 8, h: 10 }, "dog")).toBe(true);
    expect(session.staged[0]?.detection_id).toBeUndefined();
  });

  it("save PUTs the staged items with the current revision - one call", async () => {
    session.stageCandidate(CAND, "dog");
    const before = backend.calls.length;
    const result = await session.save();
    expect(backend.calls).toHaveLength(before + 1);
    const put = backend.calls[before];
    expect(put?.method).toBe("PUT");
    expect(put?.body).toEqual({
      annotation: {
        frame_index: 0,
        items: [{ box: { x: 10, y: 10, w: 20, h: 15 }, sound_label: "dog", detection_id: 0 }],
      },
      revision: 0,
    });
    expect(result.decision.frame).toBe(2);
    expect(session.revision).toBe(1);
    expect(session.lastDecision?.kind).toBe("annotate_frame");
  });

  it("nextLabel saves then jumps to the frame the scheduler asks for", async () => {
    session.stageCandidate(CAND, "dog");
    const before = backend.calls.length;
    await session.nextLabel();
    // Exactly two requests: the PUT and the GET of the requested frame.
    expect(backend.calls.slice(before).map((c) => c.method)).toEqual(["PUT", "GET"]);
    expect(session.frame).toBe(2);
    expect(session.done).toBe(false);
  });

  it("nextLabel stays put once the scheduler reports done", async () => {
    backend.saveResponse = {
      frame: 0,
      status: "human",
      decision: { kind: "done", frame: null, populated: [[0, 2]] },
      revision: 1,
    };
    session.stageCandidate(CAND, "dog");
    const before = backend.calls.length;
    await session.nextLabel();
    expect(backend.calls.slice(before).map((c) => c.method)).toEqual(["PUT"]);
    expect(session.done).toBe(true);
    expect(session.frame).toBe(0);
  });

  it("previewNext stages the propagated prediction", async () => {
    await session.previewNext();
    expect(session.frame).toBe(1);
    expect(session.pendingPreview?.frame).toBe(1);
    expect(session.staged).toEqual([
      { box: { x: 10, y: 10, w: 20, h: 15 }, sound_label: "dog", detection_id: 0 },
    ]);
  });

  it("confirming an untouched preview sends modified=false", async () => {
    await session.previewNext();
    const before = backend.calls.length;
    const result = await session.confirmPreview();
    expect(backend.calls).toHaveLength(before + 1);
    expect(backend.calls[before]?.body).toMatchObject({ frame: 1, modified: false });
    expect(result.status).toBe("auto");
    expect(session.pendingPreview).toBeNull();
  });

  it("confirming an edited preview sends modified=true", async () => {
    await session.previewNext();
    session.setLabel(0, "music");
    const result = await session.confirmPreview();
    expect(backend.calls.at(-1)?.body).toMatchObject({ frame: 1, modified: true });
    expect(result.status).toBe("auto_modified");
  });

  it("confirmPreview without a preview is a programming error, not a request", async () => {
    const before = backend.calls.length;
    await expect(session.confirmPreview()).rejects.toThrow("no pending preview");
    expect(backend.calls).toHaveLength(before);
  });

  it("moveTo records the jump server-side then loads the frame", async () => {
    const before = backend.calls.length;
    await session.moveTo(2);
    const tail = backend.calls.slice(before);
    expect(tail.map((c) => c.method)).toEqual(["POST", "GET"]);
    expect(tail[0]?.url.endsWith("/navigate")).toBe(true);
    expect(tail[0]?.body).toEqual({ frame: 2 });
    expect(session.frame).toBe(2);
  });

  it("reloading a frame discards local staging in favor of the server copy", async () => {
    session.stageCustomBox({ x: 1, y: 1, w: 5, h: 5 }, "dog");
    await session.load(0);
    expect(session.staged).toEqual([]);
  });

  it("keeps a readable action history", async () => {
    session.stageCandidate(CAND, "dog");
    await session.nextLabel();
    await session.moveTo(0);
    expect(session.history).toEqual([
      "saved frame 0 (human) -> next 2",
      "moved to frame 0",
    ]);
  });
});
