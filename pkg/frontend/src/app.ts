/** Application shell: owns the flow, fetches stats, re-renders on change. */

import { ApiClient, type FetchLike, type ReviewApi } from "./api.js";
import {
  clearSession,
  loadSession,
  saveSession,
  type KeyValueStore,
  type Session,
} from "./session.js";
import {
  renderEmpty,
  renderLoading,
  renderScenario,
  renderSessionForm,
  renderStatsPanel,
  renderUnavailable,
} from "./render.js";
import { ReviewFlow } from "./state.js";
import type { Projection, Stats } from "./types.js";

export interface AppOptions {
  baseUrl?: string;
  fetchLike?: FetchLike;
  api?: ReviewApi;
  storage?: KeyValueStore;
  document?: Document;
}

function memoryStore(): KeyValueStore {
  const entries = new Map<string, string>();
  return {
    getItem: (key) => entries.get(key) ?? null,
    setItem: (key, value) => void entries.set(key, value),
    removeItem: (key) => void entries.delete(key),
  };
}

export class App {
  private readonly doc: Document;
  private readonly storage: KeyValueStore;
  private readonly api: ReviewApi;
  private flow: ReviewFlow | null = null;
  private stats: Stats | null = null;
  private projection: Projection | null = null;
  private pending: Promise<void> | null = null;

  constructor(
    private readonly root: HTMLElement,
    options: AppOptions = {},
  ) {
    this.doc = options.document ?? root.ownerDocument;
    this.storage =
      options.storage ??
      (globalThis as { localStorage?: KeyValueStore }).localStorage ??
      memoryStore();
    this.api = options.api ?? new ApiClient(options.baseUrl ?? "", options.fetchLike);
  }

  async start(): Promise<void> {
    const session = loadSession(this.storage);
    if (session === null) {
      this.renderView();
      return;
    }
    await this.beginSession(session);
  }

  private async beginSession(session: Session): Promise<void> {
    this.flow = new ReviewFlow(this.api, session);
    this.renderView();
    await Promise.all([this.flow.loadQueue(), this.refreshStats()]);
    this.renderView();
  }

  private async refreshStats(): Promise<void> {
    try {
      this.stats = await this.api.stats();
    } catch {
      this.stats = null;
      this.projection = null;
      return;
    }
    if (this.stats.total_decisions === 0) {
      this.projection = null;
      return;
    }
    try {
      this.projection = await this.api.projection();
    } catch {
      // no observed rate yet (or transport trouble): hide the card
      this.projection = null;
    }
  }

  /**
   * Submit the current selection, then refresh statistics and re-render.
   * Repeated calls while a submission is pending share one promise, so a
   * double click cannot issue a second request.
   */
  submitCurrent(): Promise<void> {
    if (this.pending !== null) {
      return this.pending;
    }
    const flow = this.flow;
    if (flow === null || !flow.canSubmit()) {
      return Promise.resolve();
    }
    this.pending = (async () => {
      try {
        const submitted = flow.submit();
        this.renderView();
        await submitted;
        if (flow.submitPhase !== "error") {
          await this.refreshStats();
        }
      } finally {
        this.pending = null;
      }
      this.renderView();
    })();
    return this.pending;
  }

  /** Await whatever submission chain is outstanding. */
  async settle(): Promise<void> {
    while (this.pending !== null) {
      await this.pending;
    }
  }

  private async retryQueue(): Promise<void> {
    const flow = this.flow;
    if (flow === null) {
      return;
    }
    this.renderView();
    await Promise.all([flow.loadQueue(), this.refreshStats()]);
    this.renderView();
  }

  private renderView(): void {
    const doc = this.doc;
    this.root.textContent = "";

    const header = doc.createElement("header");
    header.className = "app-header";
    const title = doc.createElement("h1");
    title.textContent = "Articulation review";
    header.appendChild(title);
    if (this.flow !== null) {
      const whoami = doc.createElement("p");
      whoami.className = "whoami";
      whoami.textContent = `${this.flow.session.reviewerId} (${this.flow.session.role}) `;
      const switchButton = doc.createElement("button");
      switchButton.type = "button";
      switchButton.className = "switch-session";
      switchButton.textContent = "Switch reviewer";
      switchButton.addEventListener("click", () => {
        clearSession(this.storage);
        this.flow = null;
        this.stats = null;
        this.projection = null;
        this.renderView();
      });
      whoami.appendChild(switchButton);
      header.appendChild(whoami);
    }
    this.root.appendChild(header);

    if (this.flow === null) {
      this.root.appendChild(
        renderSessionForm(doc, {
          onStart: (session) => {
            saveSession(this.storage, session);
            void this.beginSession(session);
          },
        }),
      );
      return;
    }

    const layout = doc.createElement("div");
    layout.className = "layout";
    const main = doc.createElement("main");
    main.className = "review-pane";

    const flow = this.flow;
    switch (flow.phase) {
      case "loading":
        main.appendChild(renderLoading(doc));
        break;
      case "unavailable":
        main.appendChild(
          renderUnavailable(doc, flow.errorMessage ?? "unknown error", {
            onRetry: () => void this.retryQueue(),
          }),
        );
        break;
      case "empty":
        main.appendChild(renderEmpty(doc));
        break;
      case "reviewing":
        main.appendChild(
          renderScenario(doc, flow, {
            onSelect: (choice) => {
              if (flow.select(choice)) {
                this.renderView();
              }
            },
            onSubmit: () => void this.submitCurrent(),
          }),
        );
        break;
    }
    layout.appendChild(main);
    layout.appendChild(renderStatsPanel(doc, this.stats, this.projection));
    this.root.appendChild(layout);
  }
}
