// The adaptive-session panel: start form, recommended-pool grid,
// marginal bars, history timeline.  View state is a pure projection of
// the server's session payload; submitting a result is the only
// mutation and at most one is in flight at a time.

import { ApiError, ServiceClient, SessionState } from "./api.js";
import { formatMarginal, validateSessionForm } from "./validate.js";

export class SessionPanel {
  private state: SessionState | null = null;
  private inFlight = false;
  private banner = "";

  constructor(
    private readonly client: ServiceClient,
    private readonly root: HTMLElement,
    private readonly onSessionChange: (id: string | null) => void = () => {},
  ) {
    this.render();
  }

  get sessionId(): string | null {
    return this.state?.session_id ?? null;
  }

  async start(values: { n: number; m: number; tpr: number; tnr: number; prevalence: number }): Promise<void> {
    const errors = validateSessionForm(values);
    if (errors.length > 0) {
      this.banner = errors.join("; ");
      this.render();
      return;
    }
    await this.guarded(() => this.client.startSession({
      n: values.n,
      m: values.m,
      tpr: values.tpr,
      tnr: values.tnr,
      prevalence: values.prevalence,
    }));
  }

  async submitResult(observed: 0 | 1): Promise<void> {
    if (!this.state || this.inFlight || this.state.remaining_tests <= 0) {
      return;
    }
    const id = this.state.session_id;
    await this.guarded(() => this.client.submitResult(id, observed));
  }

  async loadSession(sessionId: string): Promise<void> {
    await this.guarded(() => this.client.getSession(sessionId));
  }

  private async guarded(action: () => Promise<SessionState>): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.inFlight = true;
    this.banner = "";
    this.render();
    try {
      this.state = await action();
      this.onSessionChange(this.state.session_id);
    } catch (error) {
      this.banner = error instanceof ApiError ? error.message : String(error);
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  private render(): void {
    const parts: string[] = [];
    parts.push(`
      <form class="start-form">
        <label>patients <input name="n" type="number" value="8"></label>
        <label>tests <input name="m" type="number" value="6"></label>
        <label>tpr <input name="tpr" type="number" step="0.01" value="0.99"></label>
        <label>tnr <input name="tnr" type="number" step="0.01" value="0.90"></label>
        <label>prevalence <input name="prevalence" type="number" step="0.001" value="0.001"></label>
        <button type="submit" ${this.inFlight ? "disabled" : ""}>start session</button>
      </form>`);
    if (this.banner) {
      parts.push(`<div class="banner error">${escapeHtml(this.banner)}</div>`);
    }
    if (this.state) {
      parts.push(this.renderState(this.state));
    }
    this.root.innerHTML = parts.join("\n");

    const form = this.root.querySelector<HTMLFormElement>("form.start-form");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      const read = (name: string) =>
        Number(form.querySelector<HTMLInputElement>(`input[name=${name}]`)!.value);
      void this.start({
        n: read("n"), m: read("m"), tpr: read("tpr"), tnr: read("tnr"),
        prevalence: read("prevalence"),
      });
    });
    this.root.querySelector("#result-positive")?.addEventListener("click", () => {
      void this.submitResult(1);
    });
    this.root.querySelector("#result-negative")?.addEventListener("click", () => {
      void this.submitResult(0);
    });
  }

  private renderState(state: SessionState): string {
    const done = state.remaining_tests <= 0;
    const design = state.recommended_design;
    const grid = Array.from({ length: state.n }, (_, i) => {
      const inPool = design !== null && design[i] === "1";
      return `<span class="patient ${inPool ? "pooled" : ""}" data-patient="${i}">P${i}</span>`;
    }).join("");
    const bars = state.marginals.map((value, i) => `
      <div class="marginal-row" data-patient="${i}">
        <span class="label">P${i}</span>
        <div class="bar"><div class="fill" style="width:${(value * 100).toFixed(2)}%"></div></div>
        <span class="value">${formatMarginal(value)}</span>
      </div>`).join("");
    const history = state.history.map((entry, i) =>
      `<li>test ${i + 1}: pool ${entry.design} read ${entry.observed ? "positive" : "negative"}</li>`,
    ).join("");
    const controls = done
      ? `<div class="diagnosis">final diagnosis <code>${state.ml_secret}</code>
           confidence ${formatMarginal(state.confidence)}</div>
         <button id="result-positive" disabled>positive</button>
         <button id="result-negative" disabled>negative</button>`
      : `<div class="recommendation">recommended pool:
           <code id="recommended">${design ?? "none"}</code></div>
         <button id="result-positive" ${this.inFlight ? "disabled" : ""}>positive</button>
         <button id="result-negative" ${this.inFlight ? "disabled" : ""}>negative</button>`;
    return `
      <section class="session" data-session="${state.session_id}">
        <div class="counter">remaining tests: <span id="remaining">${state.remaining_tests}</span> / ${state.m}</div>
        <div class="grid">${grid}</div>
        ${controls}
        <div class="marginals">${bars}</div>
        <ol class="history">${history}</ol>
      </section>`;
  }
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  })[c]!);
}
