/** Reviewer identity, entered once and kept in local storage. */

import { ROLES, type Role } from "./types.js";

export interface Session {
  reviewerId: string;
  role: Role;
}

/** Structural subset of Storage, so tests can pass a plain object. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const SESSION_KEY = "coursealign.session";

export function loadSession(store: KeyValueStore): Session | null {
  const raw = store.getItem(SESSION_KEY);
  if (raw === null) {
    return null;
  }
  try {
    const parsed = JSON.parse(raw) as { reviewerId?: unknown; role?: unknown };
    if (
      typeof parsed.reviewerId === "string" &&
      parsed.reviewerId.length > 0 &&
      typeof parsed.role === "string" &&
      (ROLES as readonly string[]).includes(parsed.role)
    ) {
      return { reviewerId: parsed.reviewerId, role: parsed.role as Role };
    }
  } catch {
    // fall through: treat unreadable state as no session
  }
  store.removeItem(SESSION_KEY);
  return null;
}

export function saveSession(store: KeyValueStore, session: Session): void {
  store.setItem(SESSION_KEY, JSON.stringify(session));
}

export function clearSession(store: KeyValueStore): void {
  store.removeItem(SESSION_KEY);
}
