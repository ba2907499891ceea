// DOM wiring: two option cards, report panel, radius chart.

import { Api } from "./api.js";
import { drawRadiusChart } from "./chart.js";
import { radiusChartData, SessionController } from "./state.js";

export interface AppElements {
  step: HTMLElement;
  leftCard: HTMLButtonElement;
  rightCard: HTMLButtonElement;
  reportPanel: HTMLElement;
  reportText: HTMLElement;
  banner: HTMLElement;
  retry: HTMLButtonElement;
  chart: HTMLCanvasElement;
}

export function findElements(doc: Document): AppElements {
  const get = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    step: get("step"),
    leftCard: get<HTMLButtonElement>("card-left"),
    rightCard: get<HTMLButtonElement>("card-right"),
    reportPanel: get("report-panel"),
    reportText: get("report-text"),
    banner: get("banner"),
    retry: get<HTMLButtonElement>("retry"),
    chart: get<HTMLCanvasElement>("chart"),
  };
}

export class App {
  readonly controller: SessionController;

  constructor(private api: Api, sid: string, private els: AppElements) {
    this.controller = new SessionController(api, sid);
    this.controller.onChange(() => this.render());
    this.els.leftCard.addEventListener("click", () => void this.controller.choose("left"));
    this.els.rightCard.addEventListener("click", () => void this.controller.choose("right"));
    this.els.retry.addEventListener("click", () => void this.controller.retry());
  }

  async start(): Promise<void> {
    await this.controller.load();
  }

  render(): void {
    const view = this.controller.view;
    if (!view) return;
    const els = this.els;
    els.step.textContent = `Comparison ${view.step}`;
    els.leftCard.innerHTML = view.left.lines.map((l) => `<div>${l}</div>`).join("");
    els.rightCard.innerHTML = view.right.lines.map((l) => `<div>${l}</div>`).join("");
    const busy = view.status === "submitting";
    els.leftCard.disabled = busy;
    els.rightCard.disabled = busy;
    if (view.report) {
      els.reportPanel.style.display = "";
      const pt = view.report.x.map((v) => v.toFixed(3)).join(", ");
      els.reportText.textContent =
        `Current recommendation: step ${view.report.t_star}, point (${pt}), ` +
        `uncertainty radius ${view.report.radius.toFixed(4)}`;
    } else {
      els.reportPanel.style.display = "none";
    }
    if (view.status === "error") {
      els.banner.style.display = "";
      els.banner.textContent = `Request failed: ${view.message ?? "unknown error"}`;
      els.retry.style.display = "";
    } else if (view.message) {
      els.banner.style.display = "";
      els.banner.textContent = view.message;
      els.retry.style.display = "none";
    } else {
      els.banner.style.display = "none";
      els.retry.style.display = "none";
    }
    const chart = radiusChartData({ radii: view.radii, t_star: view.report?.t_star ?? null });
    drawRadiusChart(els.chart, chart.points, chart.minIndex);
  }
}
