// The decode form: paste design rows and an outcome, pick a decoder,
// read back marginals, the most likely secret, and (for the certified
// decoder) the error bound.

import { ApiError, DecodeResult, ServiceClient } from "./api.js";
import { formatMarginal, formatScientific, validateBitstring } from "./validate.js";

export class DecodePanel {
  private result: DecodeResult | null = null;
  private banner = "";
  private guidance = "";
  private inFlight = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly root: HTMLElement,
  ) {
    this.render();
  }

  async submit(rowsText: string, outcome: string, method: "exact" | "mitm" | "bp",
               params: Record<string, unknown>): Promise<void> {
    if (this.inFlight) {
      return;
    }
    const rows = rowsText.split(/\s+/).filter((r) => r.length > 0);
    const errors: string[] = [];
    if (rows.length === 0) {
      errors.push("design needs at least one row");
    }
    const n = rows[0]?.length ?? 0;
    rows.forEach((row, i) => errors.push(...validateBitstring(row, n, `design row ${i + 1}`)));
    errors.push(...validateBitstring(outcome, rows.length, "outcome"));
    if (errors.length > 0) {
      this.banner = errors.join("; ");
      this.result = null;
      this.guidance = "";
      this.render();
      return;
    }
    this.inFlight = true;
    this.banner = "";
    this.guidance = "";
    this.render();
    try {
      this.result = await this.client.decode({
        design: { n, m: rows.length, rows },
        outcome,
        method,
        params,
      });
    } catch (error) {
      this.result = null;
      if (error instanceof ApiError) {
        this.banner = error.message;
        if (error.code === "no-plausible-explanation") {
          this.guidance = "No stored explanation reaches this outcome at the "
            + "current precision: lower epsilon (admitting more corrupted "
            + "readings) or decode with belief propagation instead.";
        }
      } else {
        this.banner = String(error);
      }
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  private render(): void {
    const parts: string[] = [`
      <form class="decode-form">
        <label>design rows <textarea name="rows" rows="4">110\n011</textarea></label>
        <label>outcome <input name="outcome" value="10"></label>
        <label>method
          <select name="method">
            <option value="mitm">certified (mitm)</option>
            <option value="exact">exact</option>
            <option value="bp">belief propagation</option>
          </select>
        </label>
        <label>prevalence <input name="prevalence" type="number" step="0.001" value="0.01"></label>
        <label>epsilon <input name="epsilon" type="number" step="1e-9" value="1e-8"></label>
        <button type="submit" ${this.inFlight ? "disabled" : ""}>decode</button>
      </form>`];
    if (this.banner) {
      parts.push(`<div class="banner error">${escapeHtml(this.banner)}</div>`);
    }
    if (this.guidance) {
      parts.push(`<div class="guidance">${escapeHtml(this.guidance)}</div>`);
    }
    if (this.result) {
      const r = this.result;
      const rows = r.marginals.map((value, i) =>
        `<li data-patient="${i}">P${i}: ${formatMarginal(value)}</li>`).join("");
      const bound = r.error_bound !== undefined
        ? `<div class="bound">certified error bound ${formatScientific(r.error_bound)}</div>` : "";
      const converged = r.converged !== undefined
        ? `<div class="converged">converged: ${r.converged}</div>` : "";
      parts.push(`
        <section class="decode-result">
          <div>most likely secret <code>${r.ml_secret}</code>
               confidence ${formatMarginal(r.confidence)}</div>
          ${bound}${converged}
          <ul class="decode-marginals">${rows}</ul>
        </section>`);
    }
    this.root.innerHTML = parts.join("\n");
    const form = this.root.querySelector<HTMLFormElement>("form.decode-form");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      const rows = form.querySelector<HTMLTextAreaElement>("textarea[name=rows]")!.value;
      const outcome = form.querySelector<HTMLInputElement>("input[name=outcome]")!.value.trim();
      const method = form.querySelector<HTMLSelectElement>("select[name=method]")!.value as
        "exact" | "mitm" | "bp";
      const prevalence = Number(
        form.querySelector<HTMLInputElement>("input[name=prevalence]")!.value);
      const epsilon = Number(
        form.querySelector<HTMLInputElement>("input[name=epsilon]")!.value);
      void this.submit(rows, outcome, method, { prevalence, epsilon });
    });
  }
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  })[c]!);
}
