/** Payload shapes of the explanation service's JSON API, mirrored field for field. */

export interface QueryPayload {
  id: string;
  text: string;
}

export interface SourceDocumentPayload {
  doc_id: string;
  text: string;
  retrieval_score: number;
}

export interface ContextPayload {
  query: QueryPayload;
  sources: SourceDocumentPayload[];
  k: number;
}

/** Permutations serialize as integer arrays; combinations as member-id objects. */
export type PermutationPayload = number[];

export interface CombinationPayload {
  member_ids: string[];
}

export type PerturbationPayload = PermutationPayload | CombinationPayload;

export function isPermutation(p: PerturbationPayload): p is PermutationPayload {
  return Array.isArray(p);
}

export interface AnswerRecordPayload {
  raw: string;
  normalized: string;
  perturbation: PerturbationPayload;
  oracle_calls_used: number;
}

export interface SessionPayload {
  session_id: string;
  query: QueryPayload;
  context: ContextPayload;
  oracle_id: string;
  created_at: string;
  baseline_full: AnswerRecordPayload;
  baseline_empty: AnswerRecordPayload;
  results: string[];
}

export interface RulePayload {
  answer: string;
  kind: "required_sources" | "fixed_positions";
  required_ids: string[];
  fixed_positions: Record<string, string>;
}

export interface InsightPayload {
  groups: Record<string, PerturbationPayload[]>;
  proportions: Record<string, number>;
  rules: RulePayload[];
  total_evaluated: number;
}

export interface InsightResult {
  family: "combination" | "permutation";
  insight: InsightPayload;
}

export type Outcome = "found" | "not_found" | "budget_exhausted";

export interface CounterfactualPayload {
  kind: string;
  perturbation: PerturbationPayload;
  original_answer: AnswerRecordPayload;
  new_answer: AnswerRecordPayload;
  perturbations_tested: number;
  similarity: number | null;
}

export interface CounterfactualResult {
  kind: "top_down_removal" | "bottom_up_retention" | "reordering";
  outcome: Outcome;
  baseline: AnswerRecordPayload;
  counterfactual: CounterfactualPayload | null;
  perturbations_tested: number;
}

export interface RankedEntryPayload {
  permutation: PermutationPayload;
  score: number;
  rank: number;
  answer?: AnswerRecordPayload;
}

export interface RankedResult {
  family: "optimal_permutation";
  ranked: RankedEntryPayload[];
}

export type ResultPayload = InsightResult | CounterfactualResult | RankedResult;

export type JobState = "pending" | "running" | "done" | "failed";

export interface ErrorPayload {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface JobPayload {
  job_id: string;
  session_id: string;
  kind: "insight" | "counterfactual";
  request: Record<string, unknown>;
  state: JobState;
  progress: { evaluated: number; total: number };
  result_ref: string | null;
  error: ErrorPayload | null;
  oracle_calls: number;
}

export interface OracleEntry {
  oracle_id: string;
  kind: "mock" | "http";
  capabilities: { supports_attention: boolean; max_context_chars: number };
}
