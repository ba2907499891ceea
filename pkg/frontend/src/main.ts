// Boot: attach to the session in the URL hash, or create a fresh one
// from the config textarea.

import { Api, SessionConfig } from "./api.js";
import { App, findElements } from "./app.js";

const DEFAULT_CONFIG: SessionConfig = {
  kernel: { family: "se", dim: 2, variance: 1.0, lengthscale: 1.2 },
  domain: [
    [18.0, 30.0],
    [0.0, 1.2],
  ],
  x0: [24.0, 0.3],
  norm_bound: 6.0,
  beta0: 1.0,
  seed: 1,
  labels: ["Temperature [C]", "Air speed [m/s]"],
};

async function boot(): Promise<void> {
  const api = new Api("");
  const setup = document.getElementById("setup")!;
  const session = document.getElementById("session")!;
  const configBox = document.getElementById("config") as HTMLTextAreaElement;
  configBox.value = JSON.stringify(DEFAULT_CONFIG, null, 2);

  async function attach(sid: string): Promise<void> {
    window.location.hash = sid;
    setup.style.display = "none";
    session.style.display = "";
    const app = new App(api, sid, findElements(document));
    await app.start();
  }

  document.getElementById("create")!.addEventListener("click", () => {
    void (async () => {
      try {
        const config = JSON.parse(configBox.value) as SessionConfig;
        const { session_id } = await api.createSession(config);
        await attach(session_id);
      } catch (err) {
        alert(`could not start session: ${err}`);
      }
    })();
  });

  const sid = window.location.hash.replace(/^#/, "");
  if (sid) await attach(sid);
}

window.addEventListener("load", () => void boot());
