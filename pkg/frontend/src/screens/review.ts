import { clear, el } from "../dom.js";
import { failurePanel } from "./failure.js";
import type { ScreenContext } from "../context.js";
import type { Priority, TestCase, UserStory } from "../types.js";

const PRIORITIES: Priority[] = ["high", "medium", "low"];

export function renderReviewScreen(container: HTMLElement, ctx: ScreenContext): void {
  clear(container);
  if (ctx.project.stories.length === 0) {
    container.append(
      el("section", { class: "panel" }, [
        el("p", { class: "empty" }, ["No stories to review. Generate or upload stories first."]),
      ]),
    );
    return;
  }
  for (const story of ctx.project.stories) {
    container.append(storySection(ctx, story));
  }
}

function storySection(ctx: ScreenContext, story: UserStory): HTMLElement {
  const cases = ctx.project.test_cases.filter((c) => c.story_id === story.id);
  const header = el("div", { class: "story-header" }, [
    el("h3", {}, [`${story.id}: As a ${story.as_a}, ${story.i_want}`]),
  ]);
  if (cases.length === 0) {
    // Zero cases means the coverage rule is violated; flag it where the
    // reviewer is looking instead of only in the analysis report.
    header.append(el("span", { class: "badge badge-warning" }, ["no coverage"]));
  }

  const regenerate = el("button", { class: "regenerate", "data-story-id": story.id }, [
    cases.length > 0 ? "Regenerate cases" : "Generate cases",
  ]);
  const result = el("div", { class: "generation-result" });
  regenerate.addEventListener("click", () => {
    void regenerateCases(ctx, story.id, regenerate, result);
  });
  header.append(regenerate);

  const section = el("section", { class: "panel story-section", "data-story-id": story.id }, [
    header,
  ]);
  if (cases.length > 0) {
    section.append(caseTable(ctx, cases));
  }
  section.append(result);
  return section;
}

async function regenerateCases(
  ctx: ScreenContext,
  storyId: string,
  button: HTMLButtonElement,
  result: HTMLElement,
): Promise<void> {
  if (button.dataset.busy) return; // at most one in-flight generation per story
  button.dataset.busy = "1";
  button.disabled = true;
  clear(result);
  try {
    await ctx.client.generateTestcases(storyId);
    await ctx.reload();
  } catch (err) {
    delete button.dataset.busy;
    button.disabled = false;
    result.append(failurePanel(err, () => regenerateCases(ctx, storyId, button, result)));
  }
}

function caseTable(ctx: ScreenContext, cases: TestCase[]): HTMLElement {
  const head = el("tr", {}, [
    el("th", {}, ["ID"]),
    el("th", {}, ["Title"]),
    el("th", {}, ["Steps"]),
    el("th", {}, ["Expected result"]),
    el("th", {}, ["Priority"]),
  ]);
  const rows = cases.map((c) => caseRow(ctx, c));
  return el("table", { class: "case-table" }, [
    el("thead", {}, [head]),
    el("tbody", {}, rows),
  ]);
}

function caseRow(ctx: ScreenContext, testCase: TestCase): HTMLElement {
  const steps = el(
    "ol",
    { class: "step-list" },
    testCase.steps.map((s) => el("li", {}, [s])),
  );
  return el("tr", { class: "case-row", "data-case-id": testCase.id }, [
    el("td", { class: "case-id" }, [testCase.id]),
    el("td", { class: "case-title" }, [testCase.title]),
    el("td", {}, [steps]),
    el("td", { class: "case-expected" }, [testCase.expected_result]),
    el("td", {}, [prioritySelect(ctx, testCase)]),
  ]);
}

function prioritySelect(ctx: ScreenContext, testCase: TestCase): HTMLElement {
  const select = el("select", { class: "priority-select", "data-case-id": testCase.id });
  for (const value of PRIORITIES) {
    const option = el("option", { value }, [value]);
    if (value === testCase.priority) option.setAttribute("selected", "");
    select.append(option);
  }
  select.value = testCase.priority;
  select.addEventListener("change", async () => {
    await ctx.client.setCasePriority(testCase.id, select.value as Priority);
    await ctx.reload();
  });
  return select;
}
