// Session view state: one unanswered duel at a time, report after the
// first answer, everything reconstructible from the service endpoints.

import { Api, ApiError, DuelPayload, ReportPayload, TracePayload } from "./api.js";

export interface OptionCard {
  /** "query" is the fresh proposal, "reference" the previous query. */
  role: "query" | "reference";
  values: number[];
  lines: string[];
}

export interface DuelView {
  step: number;
  left: OptionCard;
  right: OptionCard;
  report: ReportPayload | null;
  radii: number[];
  status: "idle" | "submitting" | "error";
  message: string | null;
}

/** Mirrors the service's 32-bit placement hash exactly. */
export function placementLeftIsQuery(seed: number, t: number): boolean {
  const mixed = Math.imul(((seed >>> 0) + t) >>> 0, 2654435761) >>> 0;
  return (mixed & 1) === 1;
}

export function formatCard(values: number[], labels: string[] | null): string[] {
  return values.map((v, i) => {
    const label = labels && labels[i] ? labels[i] : `dimension ${i + 1}`;
    const shown = Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-3 && v !== 0) ? v.toExponential(3) : v.toFixed(3);
    return `${label}: ${shown}`;
  });
}

function cards(duel: DuelPayload, labels: string[] | null): { left: OptionCard; right: OptionCard } {
  const query: OptionCard = { role: "query", values: duel.x, lines: formatCard(duel.x, labels) };
  const reference: OptionCard = {
    role: "reference",
    values: duel.x_prime,
    lines: formatCard(duel.x_prime, labels),
  };
  return duel.placement_left_is_query ? { left: query, right: reference } : { left: reference, right: query };
}

export class SessionController {
  view: DuelView | null = null;
  private busy = false;
  private listeners: Array<() => void> = [];

  constructor(private api: Api, public sid: string) {}

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  /** Rebuild the entire view from the service (initial load and reload). */
  async load(): Promise<DuelView> {
    const trace = await this.api.getTrace(this.sid);
    const duel = await this.api.getDuel(this.sid);
    const report = trace.t >= 1 ? await this.api.getReport(this.sid) : null;
    this.view = {
      step: duel.t,
      ...cards(duel, trace.config.labels ?? null),
      report,
      radii: [...trace.radii],
      status: "idle",
      message: null,
    };
    this.emit();
    return this.view;
  }

  /** Answer the visible duel by card side; no double submission. */
  async choose(side: "left" | "right"): Promise<void> {
    if (this.busy || !this.view || this.view.status === "submitting") return;
    this.busy = true;
    const view = this.view;
    view.status = "submitting";
    this.emit();
    const card = side === "left" ? view.left : view.right;
    const pref: 0 | 1 = card.role === "query" ? 1 : 0;
    try {
      await this.api.postPreference(this.sid, pref);
      await this.load();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else answered or the duel went stale: resynchronize
        await this.load();
        if (this.view) {
          this.view.message = "duel was already answered; showing the next one";
          this.emit();
        }
      } else {
        view.status = "error";
        view.message = err instanceof Error ? err.message : String(err);
        this.emit();
      }
    } finally {
      this.busy = false;
    }
  }

  async retry(): Promise<void> {
    if (this.busy) return;
    await this.load();
  }
}

/** Chart payload: report radius against step, with the argmin marked. */
export function radiusChartData(trace: Pick<TracePayload, "radii" | "t_star">): {
  points: Array<{ t: number; radius: number }>;
  minIndex: number | null;
} {
  const points = trace.radii.map((radius, i) => ({ t: i + 1, radius }));
  return { points, minIndex: trace.t_star === null ? null : trace.t_star - 1 };
}
