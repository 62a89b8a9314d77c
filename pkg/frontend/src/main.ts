/** DOM wiring for the workbench. All data comes from the service client and
 * is shaped by the pure builders in render.ts; this file only places it. */

import { ApiClient, ApiError } from "./api";
import { pollJob } from "./poll";
import {
  NO_RULE_NOTICE,
  PieSlice,
  answerTableRows,
  counterfactualView,
  jobView,
  pieSlices,
  rankedRows,
  ruleChips,
  sessionView,
} from "./render";
import type {
  CounterfactualResult,
  InsightResult,
  JobPayload,
  RankedResult,
  ResultPayload,
  SessionPayload,
} from "./types";

let client = new ApiClient("http://127.0.0.1:8000");
let session: SessionPayload | null = null;

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function showError(payload: { code: string; message: string } | null): void {
  const banner = $("error-banner");
  banner.innerHTML = "";
  if (!payload) {
    banner.classList.add("hidden");
    return;
  }
  banner.classList.remove("hidden");
  banner.append(el("span", "badge badge-error", payload.code), el("span", "", payload.message));
  const retry = el("button", "", "dismiss");
  retry.addEventListener("click", () => showError(null));
  banner.append(retry);
}

async function guarded<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    showError(null);
    return await work();
  } catch (error) {
    if (error instanceof ApiError) {
      showError(error.payload);
    } else {
      showError({ code: "network_error", message: String(error) });
    }
    return null;
  }
}

function arcPath(slice: PieSlice, cx: number, cy: number, r: number): string {
  const radians = (deg: number) => ((deg - 90) * Math.PI) / 180;
  const x1 = cx + r * Math.cos(radians(slice.startAngle));
  const y1 = cy + r * Math.sin(radians(slice.startAngle));
  const x2 = cx + r * Math.cos(radians(slice.endAngle));
  const y2 = cy + r * Math.sin(radians(slice.endAngle));
  const large = slice.endAngle - slice.startAngle > 180 ? 1 : 0;
  return `M ${cx} ${cy} L ${x1} ${y1} A ${r} ${r} 0 ${large} 1 ${x2} ${y2} Z`;
}

const SLICE_COLORS = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2"];

function renderPie(slices: PieSlice[], host: HTMLElement): void {
  host.innerHTML = "";
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", "0 0 120 120");
  svg.classList.add("pie");
  if (slices.length === 1) {
    const circle = document.createElementNS(svgNS, "circle");
    circle.setAttribute("cx", "60");
    circle.setAttribute("cy", "60");
    circle.setAttribute("r", "55");
    circle.setAttribute("fill", SLICE_COLORS[0]);
    svg.append(circle);
  } else {
    slices.forEach((slice, i) => {
      const path = document.createElementNS(svgNS, "path");
      path.setAttribute("d", arcPath(slice, 60, 60, 55));
      path.setAttribute("fill", SLICE_COLORS[i % SLICE_COLORS.length]);
      svg.append(path);
    });
  }
  host.append(svg);
  const legend = el("ul", "legend");
  slices.forEach((slice, i) => {
    const item = el("li");
    const swatch = el("span", "swatch");
    swatch.style.background = SLICE_COLORS[i % SLICE_COLORS.length];
    item.append(swatch, el("span", "", `${slice.answer} — ${slice.percentLabel}`));
    legend.append(item);
  });
  host.append(legend);
}

function renderInsight(result: InsightResult): void {
  const host = $("result-panel");
  host.innerHTML = "";
  host.append(el("h3", "", `${result.family} insights`));

  const pieHost = el("div", "pie-host");
  host.append(pieHost);
  renderPie(pieSlices(result.insight), pieHost);

  const table = el("table", "answers") as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const title of ["answer", "share", "count", "perturbations"]) {
    head.append(el("th", "", title));
  }
  const body = table.createTBody();
  for (const row of answerTableRows(result.insight)) {
    const tr = body.insertRow();
    tr.append(el("td", "answer-cell", row.answer));
    tr.append(el("td", "", `${(row.proportion * 100).toFixed(1)}%`));
    tr.append(el("td", "", String(row.count)));
    const cell = el("td", "perturbation-cell");
    for (const label of row.perturbationLabels.slice(0, 24)) {
      cell.append(el("code", "", label), document.createTextNode(" "));
    }
    if (row.perturbationLabels.length > 24) {
      cell.append(el("em", "", `… ${row.perturbationLabels.length - 24} more`));
    }
    tr.append(cell);
  }
  host.append(table);

  host.append(el("h4", "", "rules"));
  for (const rule of ruleChips(result.insight)) {
    const line = el("div", "rule-line");
    line.append(el("span", "rule-answer", rule.answer));
    if (rule.noRule) {
      line.append(el("em", "no-rule", NO_RULE_NOTICE));
    } else {
      for (const chip of rule.chips) {
        line.append(el("span", "chip", chip));
      }
    }
    host.append(line);
  }
  host.append(el("p", "muted", `total evaluated: ${result.insight.total_evaluated}`));
}

function renderCounterfactual(result: CounterfactualResult): void {
  const host = $("result-panel");
  host.innerHTML = "";
  if (!session) return;
  const view = counterfactualView(result, session.context);
  host.append(el("h3", "", `${view.kind} counterfactual`));
  host.append(el("p", `outcome outcome-${view.outcome}`, view.outcomeLabel));
  host.append(el("p", "", `perturbations tested: ${view.perturbationsTested}`));

  const answers = el("p", "answers-line");
  answers.append(el("span", "answer-before", view.originalAnswer));
  if (view.newAnswer !== null) {
    answers.append(el("span", "arrow", " → "), el("span", "answer-after", view.newAnswer));
  }
  host.append(answers);
  if (view.similarity !== null) {
    host.append(el("span", "badge", `similarity ${view.similarity.toFixed(4)}`));
  }

  if (result.counterfactual) {
    const panel = el("div", "side-by-side");
    for (const [title, cells] of [["before", view.before], ["after", view.after]] as const) {
      const column = el("div", "context-column");
      column.append(el("h4", "", title));
      for (const cell of cells) {
        column.append(el("div", `source-chip status-${cell.status}`, cell.docId));
      }
      panel.append(column);
    }
    host.append(panel);
  }
}

function renderRanked(result: RankedResult): void {
  const host = $("result-panel");
  host.innerHTML = "";
  host.append(el("h3", "", "optimal orderings"));
  const table = el("table", "answers") as HTMLTableElement;
  const head = table.createTHead().insertRow();
  for (const title of ["rank", "score", "order", "answer"]) {
    head.append(el("th", "", title));
  }
  const body = table.createTBody();
  for (const row of rankedRows(result)) {
    const tr = body.insertRow();
    tr.append(el("td", "", String(row.rank)));
    tr.append(el("td", "", row.score.toFixed(4)));
    tr.append(el("td", "", row.orderLabel));
    tr.append(el("td", "", row.answer ?? ""));
  }
  host.append(table);
}

function renderResult(result: ResultPayload): void {
  if ("ranked" in result) {
    renderRanked(result);
  } else if ("outcome" in result) {
    renderCounterfactual(result);
  } else {
    renderInsight(result);
  }
}

function renderSession(): void {
  const host = $("session-panel");
  host.innerHTML = "";
  if (!session) return;
  const view = sessionView(session);
  host.append(el("h3", "", view.queryText));
  const cards = el("div", "cards");
  for (const card of view.cards) {
    const node = el("div", "card");
    node.append(el("div", "card-title", `#${card.rank} ${card.docId}`));
    node.append(el("div", "card-score", `score ${card.score.toFixed(4)}`));
    node.append(el("div", "card-text", card.text));
    cards.append(node);
  }
  host.append(cards);
  host.append(el("p", "", `full-context answer: ${view.baselineFull}`));
  host.append(el("p", "", `empty-context answer: ${view.baselineEmpty}`));
  $("analysis-panel").classList.remove("hidden");
}

function trackJob(job: JobPayload): void {
  const host = $("job-panel");
  const update = (current: JobPayload) => {
    const view = jobView(current);
    host.innerHTML = "";
    host.append(el("span", `badge state-${view.state}`, view.state));
    host.append(el("span", "", ` ${view.progressLabel} evaluated`));
    if (view.errorBadge) {
      host.append(el("span", "badge badge-error", view.errorBadge));
      if (current.error) host.append(el("span", "", current.error.message));
    }
  };
  void guarded(async () => {
    const finished = await pollJob(client, job.job_id, update);
    if (finished.state === "done" && finished.result_ref) {
      const result = await client.getResult(finished.result_ref);
      renderResult(result);
    }
    return finished;
  });
}

function numberValue(id: string, fallback: number): number {
  const raw = (document.getElementById(id) as HTMLInputElement).value;
  return raw === "" ? fallback : Number(raw);
}

function launch(kind: "insight" | "counterfactual", body: Record<string, unknown>): void {
  if (!session) return;
  void guarded(async () => {
    const start = kind === "insight" ? client.startInsight : client.startCounterfactual;
    const job = await start.call(client, session!.session_id, body);
    trackJob(job);
    return job;
  });
}

function wireControls(): void {
  $("connect-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const base = (document.getElementById("base-url") as HTMLInputElement).value;
    client = new ApiClient(base.replace(/\/$/, ""));
    void guarded(async () => {
      const oracles = await client.listOracles();
      const select = document.getElementById("oracle-select") as HTMLSelectElement;
      select.innerHTML = "";
      for (const oracle of oracles.oracles) {
        const option = document.createElement("option");
        option.value = oracle.oracle_id;
        option.textContent = `${oracle.oracle_id} (${oracle.kind})`;
        select.append(option);
      }
      $("ask-panel").classList.remove("hidden");
      return oracles;
    });
  });

  $("ask-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guarded(async () => {
      session = await client.createSession({
        query_text: (document.getElementById("question") as HTMLInputElement).value,
        top_k: numberValue("top-k", 5),
        oracle_id: (document.getElementById("oracle-select") as HTMLSelectElement).value,
      });
      renderSession();
      return session;
    });
  });

  const seed = () => numberValue("seed", 0);
  const sampleSize = () => {
    const raw = (document.getElementById("sample-size") as HTMLInputElement).value;
    return raw === "" ? null : Number(raw);
  };
  const maxPerturbations = () => numberValue("max-perturbations", 1000);

  $("run-combination").addEventListener("click", () =>
    launch("insight", { family: "combination", sample_size: sampleSize(), seed: seed() }));
  $("run-permutation").addEventListener("click", () =>
    launch("insight", { family: "permutation", sample_size: sampleSize(), seed: seed() }));
  $("run-optimal").addEventListener("click", () =>
    launch("insight", { family: "optimal_permutation", s: numberValue("s-best", 3) }));
  $("run-topdown").addEventListener("click", () =>
    launch("counterfactual", { kind: "top_down_removal", max_perturbations: maxPerturbations(), seed: seed() }));
  $("run-bottomup").addEventListener("click", () => {
    const target = (document.getElementById("target-answer") as HTMLInputElement).value;
    launch("counterfactual", {
      kind: "bottom_up_retention",
      max_perturbations: maxPerturbations(),
      seed: seed(),
      target_answer: target === "" ? null : target,
    });
  });
  $("run-reordering").addEventListener("click", () =>
    launch("counterfactual", { kind: "reordering", max_perturbations: maxPerturbations(), seed: seed() }));
}

document.addEventListener("DOMContentLoaded", wireControls);
