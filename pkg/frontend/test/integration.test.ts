// @vitest-environment jsdom
//
// Drives the real session service end to end: a scripted browser
// session of five duels, double-submit rejection, and reload
// reconstruction.  The service process is spawned from the repository
// root and killed afterwards.

import { spawn, ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { App, findElements } from "../src/app.js";

const ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PORT = 18000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const resp = await fetch(`${BASE}/v1/sessions/none/trace`);
      if (resp.status === 404) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  service = spawn("python3", ["-m", "popbo.cli", "serve", "--port", String(PORT)], {
    cwd: ROOT,
    env: { ...process.env, PYTHONPATH: join(ROOT, "src") },
    stdio: "ignore",
  });
  await waitForService();
}, 40_000);

afterAll(() => {
  service?.kill();
});

function mountDom(): void {
  const html = readFileSync(join(ROOT, "frontend", "index.html"), "utf-8");
  const body = html.match(/<body>([\s\S]*)<\/body>/)![1].replace(/<script[\s\S]*?<\/script>/, "");
  document.body.innerHTML = body;
  (document.getElementById("setup") as HTMLElement).style.display = "none";
  (document.getElementById("session") as HTMLElement).style.display = "";
}

const CONFIG = {
  kernel: { family: "se", dim: 1, variance: 1.0, lengthscale: 0.3 },
  domain: [[0.0, 1.0]],
  x0: [0.5],
  norm_bound: 2.0,
  beta0: 1.0,
  seed: 5,
  outer_budget: 9,
  labels: ["setting"],
};

describe("scripted browser session", () => {
  it("runs five duels with counters matching the service trace", async () => {
    const api = new Api(BASE);
    const { session_id } = await api.createSession(CONFIG);
    mountDom();
    const app = new App(api, session_id, findElements(document));
    await app.start();

    const step = () => document.getElementById("step")!.textContent;
    expect(step()).toBe("Comparison 1");
    expect((document.getElementById("report-panel") as HTMLElement).style.display).toBe("none");

    for (let round = 1; round <= 5; round++) {
      const side = round % 2 === 0 ? "right" : "left";
      await app.controller.choose(side);
      const trace = await api.getTrace(session_id);
      expect(trace.t).toBe(round);
      expect(step()).toBe(`Comparison ${round + 1}`);
      // the service recorded exactly as many preferences as answers given
      expect(trace.prefs).toHaveLength(round);
      // report panel visible once t >= 1, showing the radius argmin
      expect((document.getElementById("report-panel") as HTMLElement).style.display).not.toBe("none");
      const minRadius = Math.min(...trace.radii);
      expect(trace.radii[trace.t_star! - 1]).toBe(minRadius);
    }

    const trace = await api.getTrace(session_id);
    expect(trace.t_star).toBeGreaterThanOrEqual(1);
    expect(trace.t_star).toBeLessThanOrEqual(5);
    const report = await api.getReport(session_id);
    expect(report.t_star).toBe(trace.t_star);
    expect(report.max_mle_point).toHaveLength(1);
  }, 120_000);

  it("rejects a second preference for one pending duel", async () => {
    const api = new Api(BASE);
    const { session_id } = await api.createSession(CONFIG);
    await api.getDuel(session_id);
    await api.postPreference(session_id, 1);
    await expect(api.postPreference(session_id, 0)).rejects.toMatchObject({ status: 409 });
  }, 60_000);

  it("reload reconstructs the identical view from the session id alone", async () => {
    const api = new Api(BASE);
    const { session_id } = await api.createSession(CONFIG);
    mountDom();
    const app = new App(api, session_id, findElements(document));
    await app.start();
    await app.controller.choose("left");
    await app.controller.choose("right");
    const before = JSON.parse(JSON.stringify(app.controller.view));

    // fresh DOM + fresh controller, same session id: same view
    mountDom();
    const app2 = new App(api, session_id, findElements(document));
    await app2.start();
    const after = JSON.parse(JSON.stringify(app2.controller.view));
    expect(after).toEqual(before);
    expect(document.getElementById("step")!.textContent).toBe("Comparison 3");
  }, 120_000);
});
