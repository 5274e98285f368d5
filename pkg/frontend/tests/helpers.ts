import { ApiClient } from "../src/api.js";
import type { ScreenContext } from "../src/context.js";

/** Let every chained handler (fetch, reload, redraw) settle. */
export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export interface Mounted {
  container: HTMLElement;
  client: ApiClient;
  rerender(): Promise<void>;
}

/** Mount one screen the way the app shell does: fetch, render, reload hook. */
export async function mountScreen(
  projectId: string,
  render: (container: HTMLElement, ctx: ScreenContext) => void | Promise<void>,
): Promise<Mounted> {
  const client = new ApiClient("");
  const container = document.createElement("div");
  document.body.appendChild(container);
  const rerender = async (): Promise<void> => {
    const project = await client.getProject(projectId);
    await render(container, { client, project, reload: rerender });
  };
  await rerender();
  return { container, client, rerender };
}

export function query<T extends Element>(root: ParentNode, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing element: ${selector}`);
  return node as T;
}
