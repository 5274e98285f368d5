import { beforeEach, describe, expect, it } from "vitest";

import { renderReviewScreen } from "../src/screens/review.js";
import { StubApi, emptyProject, fiveCases, parseFailure, researcherStory } from "./stub.js";
import { flush, mountScreen, query } from "./helpers.js";

let stub: StubApi;

beforeEach(() => {
  stub = new StubApi();
  stub.install();
  document.body.innerHTML = "";
});

function seedStoryWithCases(caseCount = 5) {
  const project = stub.addProject(emptyProject("PJ-0001", "review planner"));
  project.stories.push(researcherStory());
  if (caseCount > 0) {
    project.test_cases.push(...fiveCases("US-0001").slice(0, caseCount));
  }
  return project;
}

describe("case review table", () => {
  it("renders one row per generated case", async () => {
    seedStoryWithCases(5);
    const { container } = await mountScreen("PJ-0001", renderReviewScreen);

    expect(container.querySelectorAll(".case-row")).toHaveLength(5);
    expect(container.textContent).toContain(
      "Identify machine learning techniques for image recognition",
    );
    expect(container.textContent).toContain("Open the question planner");
  });

  it("shows a coverage warning badge on a story with zero cases", async () => {
    seedStoryWithCases(0);
    const { container } = await mountScreen("PJ-0001", renderReviewScreen);

    const badge = query(container, ".badge-warning");
    expect(badge.textContent).toBe("no coverage");
    expect(container.querySelector(".case-table")).toBeNull();
  });
});

describe("priority edit", () => {
  it("persists through the API and survives a reload", async () => {
    seedStoryWithCases(5);
    const { container } = await mountScreen("PJ-0001", renderReviewScreen);

    const select = query<HTMLSelectElement>(container, '.priority-select[data-case-id="TC-0003"]');
    expect(select.value).toBe("medium");
    select.value = "high";
    select.dispatchEvent(new Event("change"));
    await flush();

    const patches = stub.callsTo("PATCH", "/api/testcases/TC-0003");
    expect(patches).toHaveLength(1);
    expect(patches[0].body).toEqual({ priority: "high" });

    // Fresh mount, data re-fetched: the edit must still be there.
    document.body.innerHTML = "";
    const remounted = await mountScreen("PJ-0001", renderReviewScreen);
    const after = query<HTMLSelectElement>(
      remounted.container,
      '.priority-select[data-case-id="TC-0003"]',
    );
    expect(after.value).toBe("high");
  });
});

describe("per-story regeneration", () => {
  it("allows at most one in-flight generation per story", async () => {
    seedStoryWithCases(0);
    stub.casesQueues.set("US-0001", [{ cases: fiveCases("US-0001") }]);
    stub.holdGeneration = true;
    const { container } = await mountScreen("PJ-0001", renderReviewScreen);

    const button = query<HTMLButtonElement>(container, ".regenerate");
    button.click();
    button.click();
    await flush();
    expect(stub.callsTo("POST", "testcases:generate")).toHaveLength(1);

    stub.release();
    await flush();
    expect(container.querySelectorAll(".case-row")).toHaveLength(5);
  });

  it("shows diagnostics inline when regeneration fails to parse", async () => {
    seedStoryWithCases(5);
    stub.casesQueues.set("US-0001", [{ error: parseFailure("half a JSON object") }]);
    const { container } = await mountScreen("PJ-0001", renderReviewScreen);

    query<HTMLButtonElement>(container, ".regenerate").click();
    await flush();

    const section = query(container, '.story-section[data-story-id="US-0001"]');
    const panel = query(section, ".diagnostics-panel");
    expect(query(panel, ".raw-output").textContent).toBe("half a JSON object");
    expect(panel.querySelector(".retry-generate")).not.toBeNull();
    // The previous cases are untouched by a failed run.
    expect(container.querySelectorAll(".case-row")).toHaveLength(5);
  });
});
