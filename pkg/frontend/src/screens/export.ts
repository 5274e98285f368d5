import { clear, el } from "../dom.js";
import { downloadText } from "../download.js";
import type { ScreenContext } from "../context.js";
import type { AnalysisReport } from "../types.js";

export interface ExportDeps {
  /** Replaceable download sink; tests capture the CSV text through it. */
  deliver?: (text: string, filename: string) => void;
}

export async function renderExportScreen(
  container: HTMLElement,
  ctx: ScreenContext,
  deps: ExportDeps = {},
): Promise<void> {
  const deliver = deps.deliver ?? downloadText;
  clear(container);

  container.append(exportSection(ctx, deliver));

  const report = await ctx.client.analysis(ctx.project.id);
  container.append(latencySection(report), coverageSection(ctx, report));
}

function exportSection(
  ctx: ScreenContext,
  deliver: (text: string, filename: string) => void,
): HTMLElement {
  const section = el("section", { class: "panel export-panel" }, [el("h2", {}, ["Export"])]);
  if (ctx.project.test_cases.length === 0) {
    section.append(el("p", { class: "empty nothing-to-export" }, ["Nothing to export yet."]));
    return section;
  }

  const button = el("button", { class: "download-csv" }, ["Download CSV"]);
  button.addEventListener("click", async () => {
    const text = await ctx.client.exportCsv(ctx.project.id);
    deliver(text, `${ctx.project.id}.csv`);
  });
  section.append(
    el("p", {}, [`${ctx.project.test_cases.length} test cases ready.`]),
    button,
  );
  return section;
}

function latencySection(report: AnalysisReport): HTMLElement {
  const latency = report.latency;
  const section = el("section", { class: "panel latency-panel" }, [
    el("h2", {}, ["Latency"]),
  ]);
  if (latency.n === 0 || latency.mean === null) {
    section.append(el("p", { class: "empty" }, ["No generation calls recorded."]));
    return section;
  }
  section.append(
    el("p", { class: "latency-mean" }, [
      `mean ${Math.round(latency.mean)} ms over ${latency.n} calls`,
    ]),
    el("p", { class: "latency-slo" }, [
      `SLO ${latency.slo_millis} ms: ${latency.slo_pass ? "pass" : "fail"}`,
    ]),
  );
  return section;
}

function coverageSection(ctx: ScreenContext, report: AnalysisReport): HTMLElement {
  const coverage = report.coverage;
  const items = ctx.project.stories.map((story) => {
    const count = coverage.case_counts[story.id] ?? 0;
    const item = el("li", { class: "coverage-item", "data-story-id": story.id }, [
      `${story.id}: ${count} cases`,
    ]);
    if (coverage.stories_below_min.includes(story.id)) {
      item.append(el("span", { class: "badge badge-warning" }, ["below minimum"]));
    }
    return item;
  });
  return el("section", { class: "panel coverage-panel" }, [
    el("h2", {}, ["Coverage"]),
    items.length > 0
      ? el("ul", { class: "coverage-list" }, items)
      : el("p", { class: "empty" }, ["No stories yet."]),
  ]);
}
