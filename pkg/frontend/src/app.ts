import { ApiClient, ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import { renderExportScreen } from "./screens/export.js";
import { renderRequirementsScreen } from "./screens/requirements.js";
import { renderReviewScreen } from "./screens/review.js";
import type { ScreenContext } from "./context.js";

export type ScreenName = "requirements" | "review" | "export";

export interface Route {
  projectId: string | null;
  screen: ScreenName;
}

const SCREENS: ScreenName[] = ["requirements", "review", "export"];
const SCREEN_LABELS: Record<ScreenName, string> = {
  requirements: "Requirements",
  review: "Test cases",
  export: "Export & analysis",
};

/** The URL hash is the only state that survives a reload: "#/PJ-0001/review". */
export function parseHash(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter((p) => p !== "");
  const projectId = parts.length > 0 ? parts[0] : null;
  const screen = SCREENS.includes(parts[1] as ScreenName)
    ? (parts[1] as ScreenName)
    : "requirements";
  return { projectId, screen };
}

export function formatHash(route: Route): string {
  return route.projectId === null ? "#/" : `#/${route.projectId}/${route.screen}`;
}

export class App {
  private queue: Promise<void> = Promise.resolve();

  constructor(
    private readonly root: HTMLElement,
    readonly client: ApiClient,
    private readonly win: Window = window,
  ) {}

  /** Re-read the hash, re-fetch everything, redraw. No other state is kept. */
  render(): Promise<void> {
    // Renders serialize so a hashchange arriving mid-draw cannot interleave.
    this.queue = this.queue.then(() => this.draw());
    return this.queue;
  }

  private async draw(): Promise<void> {
    const route = parseHash(this.win.location.hash);
    clear(this.root);
    if (route.projectId === null) {
      await this.renderPicker();
      return;
    }
    await this.renderProject(route.projectId, route.screen);
  }

  private async renderPicker(): Promise<void> {
    const projects = await this.client.listProjects();
    const list = el(
      "ul",
      { class: "project-list" },
      projects.map((p) => {
        const link = el("a", { href: formatHash({ projectId: p.id, screen: "requirements" }) }, [
          `${p.id} ${p.name}`,
        ]);
        return el("li", {}, [link]);
      }),
    );

    const nameInput = el("input", { class: "project-name", placeholder: "New project name" });
    const createButton = el("button", { class: "create-project" }, ["Create project"]);
    createButton.addEventListener("click", async () => {
      const name = nameInput.value.trim();
      if (name === "") return;
      const project = await this.client.createProject(name);
      this.win.location.hash = formatHash({ projectId: project.id, screen: "requirements" });
      await this.render();
    });

    this.root.append(
      el("h1", {}, ["caseforge"]),
      el("section", { class: "panel" }, [el("h2", {}, ["Projects"]), list, nameInput, createButton]),
    );
  }

  private async renderProject(projectId: string, screen: ScreenName): Promise<void> {
    let project;
    try {
      project = await this.client.getProject(projectId);
    } catch (err) {
      if (err instanceof ApiError) {
        this.root.append(
          el("section", { class: "panel error-panel" }, [
            el("p", {}, [`${err.code}: ${err.message}`]),
            el("a", { href: "#/" }, ["Back to projects"]),
          ]),
        );
        return;
      }
      throw err;
    }

    const tabs = el(
      "nav",
      { class: "tabs" },
      SCREENS.map((name) => {
        const attrs: Record<string, string> = {
          href: formatHash({ projectId, screen: name }),
          class: name === screen ? "tab active" : "tab",
          "data-screen": name,
        };
        return el("a", attrs, [SCREEN_LABELS[name]]);
      }),
    );
    const container = el("main", { class: "screen" });
    this.root.append(
      el("header", { class: "app-header" }, [
        el("h1", {}, [`${project.name} `, el("small", {}, [project.id])]),
        tabs,
      ]),
      container,
    );

    const ctx: ScreenContext = {
      client: this.client,
      project,
      reload: () => this.render(),
    };
    if (screen === "requirements") {
      renderRequirementsScreen(container, ctx);
    } else if (screen === "review") {
      renderReviewScreen(container, ctx);
    } else {
      await renderExportScreen(container, ctx);
    }
  }
}

export function mount(root: HTMLElement, client?: ApiClient): App {
  const base = (globalThis as { CASEFORGE_API_BASE?: string }).CASEFORGE_API_BASE ?? "";
  const app = new App(root, client ?? new ApiClient(base));
  window.addEventListener("hashchange", () => {
    void app.render();
  });
  void app.render();
  return app;
}

const rootElement = typeof document !== "undefined" ? document.getElementById("app") : null;
if (rootElement !== null) {
  mount(rootElement);
}
