import type {
  AnnotationWire,
  ExportPayload,
  FrameBundle,
  NextPreview,
  Playback,
  ProjectInfo,
  SaveResult,
  SessionInfo,
  SessionStats,
  Thumbnail,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchFn = typeof fetch;

/**
 * Thin typed wrapper over the v1 endpoints. Every UI action maps to exactly
 * one method here, and every method issues exactly one request.
 */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const payload = (await resp.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  listProjects(): Promise<ProjectInfo[]> {
    return this.request("GET", "/projects");
  }

  createSession(project: string, sessionId?: string): Promise<SessionInfo> {
    const body = sessionId === undefined ? {} : { session_id: sessionId };
    return this.request("POST", `/projects/${encodeURIComponent(project)}/sessions`, body);
  }

  getFrame(sessionId: string, frame: number): Promise<FrameBundle> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/frames/${frame}`);
  }

  putAnnotation(
    sessionId: string,
    frame: number,
    annotation: AnnotationWire,
    revision: number,
  ): Promise<SaveResult> {
    return this.request(
      "PUT",
      `/sessions/${encodeURIComponent(sessionId)}/frames/${frame}/annotation`,
      { annotation, revision },
    );
  }

  next(sessionId: string): Promise<NextPreview> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/next`, {});
  }

  confirmNext(
    sessionId: string,
    frame: number,
    annotation: AnnotationWire,
    modified: boolean,
  ): Promise<SaveResult> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/next/confirm`, {
      frame,
      annotation,
      modified,
    });
  }

  navigate(sessionId: string, frame: number): Promise<{ frame: number; revision: number }> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/navigate`, { frame });
  }

  thumbnails(sessionId: string): Promise<Thumbnail[]> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/review/thumbnails`);
  }

  playback(sessionId: string): Promise<Playback> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/review/playback`);
  }

  stats(sessionId: string): Promise<SessionStats> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/stats`);
  }

  exportSession(sessionId: string): Promise<ExportPayload> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/export`);
  }

  /** Absolute URL for a media path the API returned (image_url / audio_url). */
  mediaUrl(path: string): string {
    return path.startsWith("http") ? path : `${this.baseUrl}${path}`;
  }
}
