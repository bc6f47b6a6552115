// Browser entry point. The console is served by the same host as the
// admin API, so the base URL is empty and fetch is the window's own.

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const mount = document.getElementById("app");
if (mount === null) throw new Error("missing #app mount point");

const app = new App(mount, new ApiClient("", fetch.bind(globalThis)));
app.boot().catch((err: unknown) => {
  mount.innerHTML = `<p class="error visible">console failed to load: ${
    err instanceof Error ? err.message : String(err)
  }</p>`;
});
