// Decode panel against a scripted backend.

import { beforeEach, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { DecodePanel } from "../src/decode.js";
import { jsonResponse, scriptedFetch } from "./helpers.js";

function mount(): HTMLElement {
  document.body.innerHTML = '<div id="panel"></div>';
  return document.querySelector<HTMLElement>("#panel")!;
}

const RESULT = {
  marginals: [0.975488, 0.00292, 0.00292],
  ml_secret: "100",
  confidence: 0.973086,
  error_bound: 2.1e-6,
  evidence_mass: 0.0041,
};

describe("DecodePanel", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("malformed bitstrings fail client-side with no request", async () => {
    const { impl, calls } = scriptedFetch([() => jsonResponse(200, RESULT)]);
    const panel = new DecodePanel(new ServiceClient("", impl), mount());
    await panel.submit("011\n10x", "01", "mitm", {});
    expect(calls).toHaveLength(0);
    expect(document.querySelector(".banner.error")!.textContent).toContain("row 2");

    await panel.submit("011\n101", "0", "mitm", {});
    expect(calls).toHaveLength(0);
    expect(document.querySelector(".banner.error")!.textContent).toContain("outcome");
  });

  it("renders marginals, secret, confidence, and the bound", async () => {
    const { impl } = scriptedFetch([() => jsonResponse(200, RESULT)]);
    const panel = new DecodePanel(new ServiceClient("", impl), mount());
    await panel.submit("011\n101\n110", "011", "mitm", { prevalence: 0.1 });
    const text = document.querySelector(".decode-result")!.textContent!;
    expect(text).toContain("100");
    expect(text).toContain("0.9731");
    expect(document.querySelector(".bound")!.textContent).toContain("2.100e-6");
    const rows = [...document.querySelectorAll(".decode-marginals li")]
      .map((el) => el.textContent);
    expect(rows).toEqual(["P0: 0.9755", "P1: 0.0029", "P2: 0.0029"]);
  });

  it("identical requests render identical panels", async () => {
    const { impl } = scriptedFetch([() => jsonResponse(200, RESULT)]);
    const panel = new DecodePanel(new ServiceClient("", impl), mount());
    await panel.submit("011\n101\n110", "011", "mitm", { prevalence: 0.1 });
    const first = document.querySelector(".decode-result")!.outerHTML;
    await panel.submit("011\n101\n110", "011", "mitm", { prevalence: 0.1 });
    expect(document.querySelector(".decode-result")!.outerHTML).toBe(first);
  });

  it("no-plausible-explanation errors show the guidance panel", async () => {
    const { impl } = scriptedFetch([
      () => jsonResponse(422, {
        code: "no-plausible-explanation",
        message: "no stored code explains outcome 1 at cutoff 0.01",
        context: { stored_codes: 1 },
      }),
    ]);
    const panel = new DecodePanel(new ServiceClient("", impl), mount());
    await panel.submit("111", "1", "mitm", {});
    expect(document.querySelector(".banner.error")!.textContent)
      .toContain("no stored code explains");
    expect(document.querySelector(".guidance")!.textContent)
      .toContain("belief propagation");
  });
});
