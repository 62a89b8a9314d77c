/** Pure view-model builders: service payload in, display structures out.
 *
 * No explanation math happens here. Every number in a view model is a payload
 * field copied through; the only transformation is display formatting
 * (one-decimal percent labels, joined id lists).
 */

import type {
  AnswerRecordPayload,
  ContextPayload,
  CounterfactualResult,
  InsightPayload,
  JobPayload,
  PerturbationPayload,
  RankedResult,
  SessionPayload,
} from "./types";
import { isPermutation } from "./types";

export interface PieSlice {
  answer: string;
  proportion: number;
  percentLabel: string;
  startAngle: number;
  endAngle: number;
}

/** One slice per answer, angles proportional to the reported shares. */
export function pieSlices(insight: InsightPayload): PieSlice[] {
  const slices: PieSlice[] = [];
  let angle = 0;
  for (const [answer, proportion] of Object.entries(insight.proportions)) {
    const sweep = proportion * 360;
    slices.push({
      answer,
      proportion,
      percentLabel: `${(proportion * 100).toFixed(1)}%`,
      startAngle: angle,
      endAngle: angle + sweep,
    });
    angle += sweep;
  }
  return slices;
}

export function formatPerturbation(p: PerturbationPayload): string {
  if (isPermutation(p)) {
    return `[${p.join(", ")}]`;
  }
  return p.member_ids.length ? `{${p.member_ids.join(", ")}}` : "{} (empty context)";
}

export interface AnswerTableRow {
  answer: string;
  count: number;
  proportion: number;
  perturbationLabels: string[];
}

/** Grouped answer table, one row per answer, exactly as the payload groups. */
export function answerTableRows(insight: InsightPayload): AnswerTableRow[] {
  return Object.entries(insight.groups).map(([answer, perturbations]) => ({
    answer,
    count: perturbations.length,
    proportion: insight.proportions[answer],
    perturbationLabels: perturbations.map(formatPerturbation),
  }));
}

export interface RuleChips {
  answer: string;
  chips: string[];
  noRule: boolean;
}

/** Rule chips per answer; an empty rule renders the explicit no-rule notice. */
export function ruleChips(insight: InsightPayload): RuleChips[] {
  return insight.rules.map((rule) => {
    const chips =
      rule.kind === "required_sources"
        ? rule.required_ids.map((id) => `requires ${id}`)
        : Object.entries(rule.fixed_positions)
            .sort(([a], [b]) => Number(a) - Number(b))
            .map(([position, docId]) => `position ${position} ↦ ${docId}`);
    return { answer: rule.answer, chips, noRule: chips.length === 0 };
  });
}

export const NO_RULE_NOTICE = "no rules were found";

export type SourceStatus = "kept" | "removed" | "retained" | "moved";

export interface SourceCell {
  docId: string;
  status: SourceStatus;
  /** Position in the counterfactual ordering; null when the source is absent. */
  afterPosition: number | null;
}

export interface CounterfactualView {
  outcome: "found" | "not_found" | "budget_exhausted";
  outcomeLabel: string;
  kind: string;
  originalAnswer: string;
  newAnswer: string | null;
  perturbationsTested: number;
  similarity: number | null;
  before: SourceCell[];
  after: SourceCell[];
}

const OUTCOME_LABELS: Record<string, string> = {
  found: "counterfactual found",
  not_found: "no counterfactual exists",
  budget_exhausted: "search budget exhausted",
};

/** Side-by-side before/after panel with removed/retained/moved highlighting. */
export function counterfactualView(
  result: CounterfactualResult,
  context: ContextPayload,
): CounterfactualView {
  const ids = context.sources.map((s) => s.doc_id);
  const view: CounterfactualView = {
    outcome: result.outcome,
    outcomeLabel: OUTCOME_LABELS[result.outcome],
    kind: result.kind,
    originalAnswer: result.baseline.normalized,
    newAnswer: null,
    perturbationsTested: result.perturbations_tested,
    similarity: null,
    before: ids.map((docId, i) => ({ docId, status: "kept", afterPosition: i })),
    after: [],
  };
  const cf = result.counterfactual;
  if (!cf) {
    return view;
  }
  view.newAnswer = cf.new_answer.normalized;
  view.similarity = cf.similarity;

  if (isPermutation(cf.perturbation)) {
    const order = cf.perturbation;
    view.before = ids.map((docId, i) => {
      const afterPosition = order.indexOf(i);
      return { docId, status: afterPosition === i ? "kept" : "moved", afterPosition };
    });
    view.after = order.map((original, position) => ({
      docId: ids[original],
      status: original === position ? "kept" : "moved",
      afterPosition: position,
    }));
    return view;
  }

  const members = new Set(cf.perturbation.member_ids);
  if (result.kind === "top_down_removal") {
    const kept = ids.filter((d) => !members.has(d));
    view.before = ids.map((docId) => ({
      docId,
      status: members.has(docId) ? "removed" : "kept",
      afterPosition: members.has(docId) ? null : kept.indexOf(docId),
    }));
    view.after = kept.map((docId, i) => ({ docId, status: "kept", afterPosition: i }));
  } else {
    const kept = ids.filter((d) => members.has(d));
    view.before = ids.map((docId) => ({
      docId,
      status: members.has(docId) ? "retained" : "removed",
      afterPosition: members.has(docId) ? kept.indexOf(docId) : null,
    }));
    view.after = kept.map((docId, i) => ({ docId, status: "retained", afterPosition: i }));
  }
  return view;
}

export interface JobView {
  state: string;
  terminal: boolean;
  evaluated: number;
  total: number;
  progressLabel: string;
  errorBadge: string | null;
}

export function jobView(job: JobPayload): JobView {
  return {
    state: job.state,
    terminal: job.state === "done" || job.state === "failed",
    evaluated: job.progress.evaluated,
    total: job.progress.total,
    progressLabel: `${job.progress.evaluated}/${job.progress.total}`,
    errorBadge: job.error ? job.error.code : null,
  };
}

export interface SourceCard {
  rank: number;
  docId: string;
  score: number;
  text: string;
}

export interface SessionView {
  sessionId: string;
  queryText: string;
  cards: SourceCard[];
  baselineFull: string;
  baselineEmpty: string;
}

export function sessionView(session: SessionPayload): SessionView {
  return {
    sessionId: session.session_id,
    queryText: session.query.text,
    cards: session.context.sources.map((source, i) => ({
      rank: i + 1,
      docId: source.doc_id,
      score: source.retrieval_score,
      text: source.text,
    })),
    baselineFull: session.baseline_full.normalized,
    baselineEmpty: session.baseline_empty.normalized,
  };
}

export interface RankedRow {
  rank: number;
  score: number;
  orderLabel: string;
  answer: string | null;
}

export function rankedRows(result: RankedResult): RankedRow[] {
  return result.ranked.map((entry) => ({
    rank: entry.rank,
    score: entry.score,
    orderLabel: `[${entry.permutation.join(", ")}]`,
    answer: entry.answer ? entry.answer.normalized : null,
  }));
}

export function answerRecordLabel(record: AnswerRecordPayload): string {
  return record.normalized;
}
