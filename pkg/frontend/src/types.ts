// Wire types mirroring the service's JSON bodies. View state is derived from
// these; no business rules are re-implemented on the client.

export type Priority = "high" | "medium" | "low";

export interface Requirement {
  id: string;
  text: string;
  created_at: string;
}

export interface Epic {
  id: string;
  title: string;
  story_ids: string[];
}

export interface UserStory {
  id: string;
  as_a: string;
  i_want: string;
  so_that: string;
  acceptance_criteria: string[];
  priority: Priority;
}

export interface TestCase {
  id: string;
  story_id: string;
  title: string;
  preconditions: string[];
  steps: string[];
  expected_result: string;
  priority: Priority;
  tags: string[];
}

export interface Project {
  id: string;
  name: string;
  requirements: Requirement[];
  epics: Epic[];
  stories: UserStory[];
  test_cases: TestCase[];
  sessions: string[];
}

export interface ProjectRef {
  id: string;
  name: string;
}

export interface SessionSummary {
  id: string;
  kind: string;
  outcome: string;
  method: string | null;
  retries: number;
  exchange_count: number;
  latency_ms: number;
}

export interface StageDiagnostic {
  stage: string;
  message: string;
}

export interface GenerationFailure {
  session?: SessionSummary;
  diagnostics?: StageDiagnostic[];
  raw_text?: string;
}

export interface ApiErrorBody {
  status: number;
  code: string;
  message: string;
  details: (GenerationFailure & Record<string, unknown>) | null;
}

export interface StoriesResponse {
  stories: UserStory[];
  session: SessionSummary;
}

export interface CasesResponse {
  cases: TestCase[];
  session: SessionSummary;
}

export interface ImportResponse {
  stories: UserStory[];
  diagnostics: string[];
}

export interface CoverageReport {
  case_counts: Record<string, number>;
  stories_below_min: string[];
  orphan_cases: string[];
  criteria_coverage: Record<string, number>;
  stories_without_criteria: string[];
  min_cases: number;
}

export interface LatencyReport {
  n: number;
  mean: number | null;
  median: number | null;
  p95: number | null;
  min: number | null;
  max: number | null;
  slo_millis: number;
  slo_pass: boolean | null;
}

export interface AnalysisReport {
  project_id: string;
  coverage: CoverageReport;
  latency: LatencyReport;
  duplicates: { groups: string[][]; threshold: number };
  conformance: {
    sessions_total: number;
    parse_success_rate: number;
    method_counts: Record<string, number>;
    outcome_counts: Record<string, number>;
    retry_total: number;
  };
}
