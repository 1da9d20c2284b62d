import type { DecisionRecord, Projection, Scenario, Stats } from "../../src/types.js";
import type { DecisionRequest, ReviewApi } from "../../src/api.js";

export function makeScenario(label: string, nCandidates = 7): Scenario {
  const source = `alpha:SRC${label}`;
  return {
    scenario_id: `${source}::beta`,
    source_course: {
      id: source,
      title: `Source course ${label}`,
      description: `What the sending course ${label} covers.`,
      institution_id: "alpha",
    },
    receiving_institution_id: "beta",
    candidates: Array.from({ length: nCandidates }, (_, i) => ({
      course_id: `beta:C${label}${i}`,
      title: `Candidate ${label}${i}`,
      description: `Catalog text for candidate ${label}${i}.`,
      cosine: 0.9 - i * 0.05,
    })),
  };
}

export function makeStats(partial: Partial<Stats> = {}): Stats {
  return {
    total_decisions: 0,
    by_role: {
      staff: { decided: 0, accepted: 0, rate: null },
      faculty: { decided: 0, accepted: 0, rate: null },
    },
    overall_rate: null,
    overall_rate_weighted: null,
    ...partial,
  };
}

export function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export function acceptedRecord(request: DecisionRequest): DecisionRecord {
  return { ...request, ts: "2024-01-01T00:00:00+00:00" };
}

/**
 * Scriptable ReviewApi. Tests reassign the on* handlers; every decision
 * request is recorded so POST counts can be asserted exactly.
 */
export class FakeApi implements ReviewApi {
  queueCalls: Array<{ reviewerId: string; limit: number | undefined }> = [];
  decisionCalls: DecisionRequest[] = [];

  onQueue: (reviewerId: string, limit?: number) => Promise<Scenario[]> = () =>
    Promise.resolve([]);
  onDecision: (request: DecisionRequest) => Promise<DecisionRecord> = (request) =>
    Promise.resolve(acceptedRecord(request));
  onStats: () => Promise<Stats> = () => Promise.resolve(makeStats());
  onProjection: () => Promise<Projection> = () =>
    Promise.resolve({
      candidates: 0,
      rate: 0,
      rate_source: "observed",
      existing: 0,
      expected_accepted: 0,
      fold_increase: 0,
    });

  queue(reviewerId: string, limit?: number): Promise<Scenario[]> {
    this.queueCalls.push({ reviewerId, limit });
    return this.onQueue(reviewerId, limit);
  }

  submitDecision(request: DecisionRequest): Promise<DecisionRecord> {
    this.decisionCalls.push(request);
    return this.onDecision(request);
  }

  stats(): Promise<Stats> {
    return this.onStats();
  }

  projection(): Promise<Projection> {
    return this.onProjection();
  }
}
