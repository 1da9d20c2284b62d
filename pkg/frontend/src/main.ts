/** Browser entry point. */

import { App } from "./app.js";

/**
 * The service base URL is configurable without rebuilding: a global set
 * before this script runs wins, then a meta tag, then same-origin ("").
 * Same-origin is the default because the serve subcommand hosts this
 * bundle and the API on one port.
 */
export function resolveBaseUrl(doc: Document): string {
  const globals = globalThis as { COURSEALIGN_SERVICE_URL?: unknown };
  if (typeof globals.COURSEALIGN_SERVICE_URL === "string") {
    return globals.COURSEALIGN_SERVICE_URL;
  }
  const meta = doc.querySelector('meta[name="coursealign-service"]');
  return meta?.getAttribute("content") ?? "";
}

export function mount(doc: Document): App | null {
  const root = doc.getElementById("app");
  if (root === null) {
    return null;
  }
  const app = new App(root, {
    baseUrl: resolveBaseUrl(doc),
    document: doc,
  });
  void app.start();
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  mount(document);
}
