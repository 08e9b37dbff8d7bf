import { ApiClient } from "./api.js";
import { AnnotateSession } from "./state.js";
import { AnnotateView } from "./views/annotate.js";
import { ReviewView } from "./views/review.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  const stored = window.localStorage.getItem("avloop.api");
  if (stored) return stored;
  return `http://${window.location.hostname || "localhost"}:8080`;
}

class App {
  readonly api = new ApiClient(apiBase());
  session: AnnotateSession | null = null;
  private annotateView: AnnotateView | null = null;
  private reviewView: ReviewView | null = null;

  constructor(private readonly root: HTMLElement) {
    window.addEventListener("hashchange", () => void this.route());
  }

  async route(): Promise<void> {
    this.annotateView?.unmount();
    this.annotateView = null;
    this.reviewView?.unmount();
    this.reviewView = null;
    const hash = window.location.hash || "#/";
    if (hash.startsWith("#/annotate") && this.session) {
      this.annotateView = new AnnotateView(this.session);
      this.annotateView.mount(this.root);
    } else if (hash.startsWith("#/review") && this.session) {
      this.reviewView = new ReviewView(this.api, this.session.sessionId, (frame) => {
        void this.moveTo(frame);
      });
      await this.reviewView.mount(this.root);
    } else {
      await this.projectPicker();
    }
    this.renderNav();
  }

  private async moveTo(frame: number): Promise<void> {
    if (!this.session) return;
    await this.session.moveTo(frame);
    window.location.hash = "#/annotate";
    await this.route();
  }

  private renderNav(): void {
    let nav = document.querySelector("nav.topnav");
    if (!nav) {
      nav = document.createElement("nav");
      nav.className = "topnav";
      document.body.prepend(nav);
    }
    nav.innerHTML = "";
    const link = (label: string, hash: string) => {
      const a = document.createElement("a");
      a.textContent = label;
      a.href = hash;
      if (window.location.hash.startsWith(hash)) a.className = "active";
      nav.append(a);
    };
    link("Projects", "#/");
    if (this.session) {
      link("Annotate", "#/annotate");
      link("Review", "#/review");
      const label = document.createElement("span");
      label.className = "muted";
      label.textContent = `${this.session.project} / ${this.session.sessionId}`;
      nav.append(label);
    }
  }

  private async projectPicker(): Promise<void> {
    const root = this.root;
    root.innerHTML = "";
    const title = document.createElement("h2");
    title.textContent = "Projects";
    root.append(title);
    let projects;
    try {
      projects = await this.api.listProjects();
    } catch {
      const err = document.createElement("p");
      err.textContent = `cannot reach API at ${this.api.baseUrl} - is the server running?`;
      root.append(err);
      return;
    }
    const list = document.createElement("ul");
    list.className = "project-list";
    for (const proj of projects) {
      const li = document.createElement("li");
      const btn = document.createElement("button");
      btn.textContent = `${proj.name} (${proj.n_frames} frames @ ${proj.fps} fps)`;
      btn.addEventListener("click", () => {
        void (async () => {
          this.session = await AnnotateSession.create(this.api, proj.name);
          window.location.hash = "#/annotate";
          await this.route();
        })();
      });
      li.append(btn);
      if (proj.sessions.length) {
        const note = document.createElement("span");
        note.className = "muted";
        note.textContent = ` sessions: ${proj.sessions.join(", ")}`;
        li.append(note);
      }
      list.append(li);
    }
    if (!projects.length) {
      const empty = document.createElement("p");
      empty.className = "muted";
      empty.textContent = "no projects in the data directory - run the synth or ingest CLI first";
      root.append(empty);
    }
    root.append(list);
  }
}

const rootEl = document.getElementById("app");
if (rootEl) {
  const app = new App(rootEl);
  void app.route();
}
