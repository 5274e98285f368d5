import { ApiError } from "../api.js";
import { clear, el } from "../dom.js";
import { failurePanel } from "./failure.js";
import type { ScreenContext } from "../context.js";
import type { Epic, UserStory } from "../types.js";

/** Anything file-shaped: the real File object, or a plain stub in tests. */
export interface UploadSource {
  name: string;
  text(): Promise<string>;
}

export function renderRequirementsScreen(container: HTMLElement, ctx: ScreenContext): void {
  clear(container);
  container.append(
    entrySection(ctx),
    uploadSection(ctx),
    requirementsSection(ctx),
    generateSection(ctx),
    storiesSection(ctx),
  );
}

function entrySection(ctx: ScreenContext): HTMLElement {
  const input = el("textarea", {
    class: "requirement-input",
    placeholder: "Describe a requirement in free text",
    rows: "3",
  });
  const submit = el("button", { class: "add-requirement", disabled: "" }, ["Add requirement"]);

  // Empty text keeps the button disabled; the server would reject it anyway.
  input.addEventListener("input", () => {
    submit.disabled = input.value.trim() === "";
  });
  submit.addEventListener("click", async () => {
    const text = input.value.trim();
    if (text === "") return;
    await ctx.client.addRequirement(ctx.project.id, text);
    await ctx.reload();
  });

  return el("section", { class: "panel requirement-entry" }, [
    el("h2", {}, ["Requirements"]),
    input,
    submit,
  ]);
}

function uploadSection(ctx: ScreenContext): HTMLElement {
  const picker = el("input", { type: "file", class: "story-file", accept: ".json,.csv" });
  const status = el("p", { class: "upload-status" });

  picker.addEventListener("change", async () => {
    const file = picker.files && picker.files[0];
    if (!file) return;
    const notes = await uploadStories(ctx, file);
    status.textContent = notes.join("; ");
  });

  return el("section", { class: "panel story-upload" }, [
    el("h2", {}, ["Upload predefined stories"]),
    el("p", { class: "hint" }, ["JSON array or CSV with as_a / i_want columns."]),
    picker,
    status,
  ]);
}

/** Push an uploaded story file to the server; returns per-row skip notes. */
export async function uploadStories(ctx: ScreenContext, file: UploadSource): Promise<string[]> {
  const format = file.name.toLowerCase().endsWith(".csv") ? "csv" : "json";
  const text = await file.text();
  try {
    const result = await ctx.client.importStories(ctx.project.id, text, format);
    await ctx.reload();
    return result.diagnostics.length > 0
      ? result.diagnostics
      : [`imported ${result.stories.length} stories`];
  } catch (err) {
    if (err instanceof ApiError) return [err.message];
    throw err;
  }
}

function requirementsSection(ctx: ScreenContext): HTMLElement {
  const items = ctx.project.requirements.map((r) =>
    el("li", { class: "requirement-item" }, [`${r.id}: ${r.text}`]),
  );
  const body =
    items.length > 0
      ? el("ul", { class: "requirement-list" }, items)
      : el("p", { class: "empty" }, ["No requirements yet."]);
  return el("section", { class: "panel" }, [body]);
}

function generateSection(ctx: ScreenContext): HTMLElement {
  const button = el("button", { class: "generate-stories" }, ["Generate stories"]);
  const result = el("div", { class: "generation-result" });
  const section = el("section", { class: "panel" }, [button, result]);

  button.addEventListener("click", () => {
    void runGeneration(ctx, button, result);
  });
  if (ctx.project.requirements.length === 0) {
    button.disabled = true;
  }
  return section;
}

async function runGeneration(
  ctx: ScreenContext,
  button: HTMLButtonElement,
  result: HTMLElement,
): Promise<void> {
  if (button.dataset.busy) return; // one generation in flight at a time
  button.dataset.busy = "1";
  button.disabled = true;
  clear(result);
  result.append(el("p", { class: "progress" }, ["Generating stories..."]));
  try {
    await ctx.client.generateStories(ctx.project.id);
    await ctx.reload();
  } catch (err) {
    delete button.dataset.busy;
    button.disabled = false;
    clear(result);
    result.append(failurePanel(err, () => runGeneration(ctx, button, result)));
  }
}

function storiesSection(ctx: ScreenContext): HTMLElement {
  const { epics, stories } = ctx.project;
  if (stories.length === 0) {
    return el("section", { class: "panel" }, [
      el("p", { class: "empty" }, ["No stories yet. Add requirements and generate, or upload a story file."]),
    ]);
  }

  const byId = new Map(stories.map((s) => [s.id, s]));
  const grouped = new Set<string>();
  const section = el("section", { class: "panel story-groups" }, [el("h2", {}, ["Stories"])]);

  for (const epic of epics) {
    const cards = epic.story_ids
      .map((id) => byId.get(id))
      .filter((s): s is UserStory => s !== undefined)
      .map(storyCard);
    epic.story_ids.forEach((id) => grouped.add(id));
    section.append(epicGroup(epic, cards));
  }
  const loose = stories.filter((s) => !grouped.has(s.id)).map(storyCard);
  if (loose.length > 0) {
    section.append(el("div", { class: "epic-group" }, [el("h3", {}, ["Ungrouped"]), ...loose]));
  }
  return section;
}

function epicGroup(epic: Epic, cards: HTMLElement[]): HTMLElement {
  return el("div", { class: "epic-group" }, [
    el("h3", {}, [`${epic.id} ${epic.title}`]),
    ...cards,
  ]);
}

function storyCard(story: UserStory): HTMLElement {
  const narrative =
    story.so_that !== ""
      ? `As a ${story.as_a}, ${story.i_want}, so that ${story.so_that}`
      : `As a ${story.as_a}, ${story.i_want}`;
  const card = el("div", { class: "story-card", "data-story-id": story.id }, [
    el("div", { class: "story-meta" }, [`${story.id} · ${story.priority}`]),
    el("p", { class: "story-text" }, [narrative]),
  ]);
  if (story.acceptance_criteria.length > 0) {
    card.append(
      el(
        "ul",
        { class: "criteria-list" },
        story.acceptance_criteria.map((c) => el("li", {}, [c])),
      ),
    );
  }
  return card;
}
