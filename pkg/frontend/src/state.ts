/** Review session state machine: queue, selection, and submission. */

import { ApiError, type ReviewApi } from "./api.js";
import type { Session } from "./session.js";
import { NONE_CHOICE, type Scenario } from "./types.js";

/**
 * Where the session as a whole stands.
 *
 *   loading      queue fetch in progress
 *   reviewing    a scenario is on screen
 *   empty        the reviewer has decided every scenario
 *   unavailable  the queue could not be fetched; retry offered
 */
export type FlowPhase = "loading" | "reviewing" | "empty" | "unavailable";

/** Where the current scenario's submission stands. */
export type SubmitPhase = "idle" | "inflight" | "error";

const QUEUE_LIMIT = 50;

export class ReviewFlow {
  phase: FlowPhase = "loading";
  submitPhase: SubmitPhase = "idle";
  /** Candidate course id, NONE_CHOICE, or null while nothing is selected. */
  selection: string | null = null;
  errorMessage: string | null = null;

  private queue: Scenario[] = [];
  private busy = false;
  private pending: Promise<void> | null = null;

  constructor(
    private readonly api: ReviewApi,
    readonly session: Session,
  ) {}

  current(): Scenario | null {
    return this.queue[0] ?? null;
  }

  async loadQueue(): Promise<void> {
    this.phase = "loading";
    this.errorMessage = null;
    try {
      this.queue = await this.api.queue(this.session.reviewerId, QUEUE_LIMIT);
    } catch (err) {
      this.phase = "unavailable";
      this.errorMessage = err instanceof Error ? err.message : String(err);
      return;
    }
    this.phase = this.queue.length > 0 ? "reviewing" : "empty";
  }

  /**
   * Record the reviewer's pick. Only ids present in the current scenario
   * payload (or the no-match sentinel) are accepted; anything else is
   * rejected so an invalid choice can never reach the service.
   */
  select(choice: string): boolean {
    const scenario = this.current();
    if (scenario === null || this.busy) {
      return false;
    }
    const known =
      choice === NONE_CHOICE ||
      scenario.candidates.some((c) => c.course_id === choice);
    if (!known) {
      return false;
    }
    this.selection = choice;
    if (this.submitPhase === "error") {
      this.submitPhase = "idle";
      this.errorMessage = null;
    }
    return true;
  }

  canSubmit(): boolean {
    return this.selection !== null && !this.busy && this.current() !== null;
  }

  /**
   * Submit the current selection. While a submission is in flight the same
   * promise is returned, so a double click issues exactly one request.
   *
   * 201 and 409 both advance (409 means the decision already exists);
   * 422 and transport failures keep the selection so the reviewer can
   * correct or retry.
   */
  submit(): Promise<void> {
    if (this.busy) {
      return this.pending ?? Promise.resolve();
    }
    const scenario = this.current();
    const choice = this.selection;
    if (scenario === null || choice === null) {
      return Promise.resolve();
    }
    this.busy = true;
    this.submitPhase = "inflight";
    this.errorMessage = null;
    this.pending = (async () => {
      try {
        await this.api.submitDecision({
          scenario_id: scenario.scenario_id,
          reviewer_id: this.session.reviewerId,
          role: this.session.role,
          choice,
        });
        await this.advance();
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // someone (perhaps a pre-refresh tab) already decided this one
          await this.advance();
        } else {
          this.submitPhase = "error";
          this.errorMessage = err instanceof Error ? err.message : String(err);
        }
      } finally {
        this.busy = false;
        this.pending = null;
      }
    })();
    return this.pending;
  }

  private async advance(): Promise<void> {
    this.queue.shift();
    this.selection = null;
    this.submitPhase = "idle";
    this.errorMessage = null;
    if (this.queue.length > 0) {
      this.phase = "reviewing";
      return;
    }
    // local batch exhausted; the server may hold more than one page
    try {
      this.queue = await this.api.queue(this.session.reviewerId, QUEUE_LIMIT);
    } catch {
      this.queue = [];
    }
    this.phase = this.queue.length > 0 ? "reviewing" : "empty";
  }
}
