import { ApiError } from "../api.js";
import { el } from "../dom.js";
import type { GenerationFailure } from "../types.js";

/**
 * Diagnostics-first failure display: the raw model output and every stage's
 * complaint, verbatim from the ApiError, plus a retry hook.
 */
export function failurePanel(err: unknown, retry: () => void | Promise<void>): HTMLElement {
  if (!(err instanceof ApiError)) throw err;

  const details: GenerationFailure = err.body.details ?? {};
  const panel = el("div", { class: "diagnostics-panel" }, [
    el("h3", {}, [`Generation failed: ${err.message}`]),
  ]);
  if (details.session) {
    const s = details.session;
    panel.append(
      el("p", { class: "session-line" }, [
        `session ${s.id}: outcome ${s.outcome}, ${s.exchange_count} exchanges, ${s.retries} retries`,
      ]),
    );
  }
  if (details.raw_text) {
    panel.append(el("pre", { class: "raw-output" }, [details.raw_text]));
  }
  const diagnostics = details.diagnostics ?? [];
  if (diagnostics.length > 0) {
    panel.append(
      el(
        "ul",
        { class: "diagnostic-list" },
        diagnostics.map((d) => el("li", {}, [`${d.stage}: ${d.message}`])),
      ),
    );
  }
  const retryButton = el("button", { class: "retry-generate" }, ["Retry with corrective prompt"]);
  retryButton.addEventListener("click", () => {
    void retry();
  });
  panel.append(retryButton);
  return panel;
}
