/** Shapes exchanged with the review service. */

export interface Candidate {
  course_id: string;
  title: string;
  description: string;
  cosine: number;
}

export interface SourceCourse {
  id: string;
  title: string;
  description: string;
  institution_id: string;
}

export interface Scenario {
  scenario_id: string;
  source_course: SourceCourse;
  receiving_institution_id: string;
  candidates: Candidate[];
}

export interface RoleStats {
  decided: number;
  accepted: number;
  rate: number | null;
}

export interface Stats {
  total_decisions: number;
  by_role: Record<string, RoleStats>;
  overall_rate: number | null;
  overall_rate_weighted: number | null;
}

export interface Projection {
  candidates: number;
  rate: number;
  rate_source: string;
  existing: number;
  expected_accepted: number;
  fold_increase: number;
}

export interface DecisionRecord {
  scenario_id: string;
  reviewer_id: string;
  role: string;
  choice: string;
  ts: string;
}

export type Role = "staff" | "faculty";

export const ROLES: readonly Role[] = ["staff", "faculty"];

/** Sentinel choice meaning "no suitable match was present". */
export const NONE_CHOICE = "NONE";
