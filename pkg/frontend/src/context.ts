import type { ApiClient } from "./api.js";
import type { Project } from "./types.js";

/** What every screen gets: the client, fresh project data, and a re-fetch hook. */
export interface ScreenContext {
  client: ApiClient;
  project: Project;
  reload(): Promise<void>;
}
