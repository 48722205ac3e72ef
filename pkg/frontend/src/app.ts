// Bootstrap: wire the panels to the service and keep the session id in
// the URL hash so a reload reconstructs the identical view from GET.

import { ServiceClient } from "./api.js";
import { DecodePanel } from "./decode.js";
import { SessionPanel } from "./session.js";

declare global {
  interface Window {
    POOLKIT_API_BASE?: string;
  }
}

export interface App {
  session: SessionPanel;
  decode: DecodePanel;
}

export function installApp(root: HTMLElement, client?: ServiceClient): App {
  const api = client ?? new ServiceClient(window.POOLKIT_API_BASE ?? "");
  root.innerHTML = `
    <h1>pooled testing console</h1>
    <div id="session-panel"></div>
    <h2>decode a finished run</h2>
    <div id="decode-panel"></div>`;
  const sessionRoot = root.querySelector<HTMLElement>("#session-panel")!;
  const decodeRoot = root.querySelector<HTMLElement>("#decode-panel")!;

  const session = new SessionPanel(api, sessionRoot, (id) => {
    window.location.hash = id ? `session=${id}` : "";
  });
  const decode = new DecodePanel(api, decodeRoot);

  const match = window.location.hash.match(/session=([0-9a-f-]+)/);
  if (match) {
    void session.loadSession(match[1]);
  }
  return { session, decode };
}

if (typeof document !== "undefined" && document.querySelector("#app")) {
  installApp(document.querySelector<HTMLElement>("#app")!);
}
