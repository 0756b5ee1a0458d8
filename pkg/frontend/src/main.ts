import { ApiClient, ApiError } from "./api.js";
import { canSubmit } from "./form.js";
import { MapCanvas } from "./map.js";
import { StatusPage } from "./status.js";

/**
 * Page controller: request form with map drawing on the left, job view on
 * the right. The current request id lives in the URL hash
 * (#/requests/<id>), so reloading or sharing the link reconstructs the job
 * view purely from the API.
 */
export class App {
  readonly api: ApiClient;
  readonly map: MapCanvas;
  private readonly statusPage: StatusPage;
  private readonly doc: Document;
  private readonly onHashChange = () => void this.route();

  constructor(doc: Document, api?: ApiClient, pollIntervalMs = 2000) {
    this.doc = doc;
    this.api = api ?? new ApiClient();
    this.map = new MapCanvas(this.el<HTMLCanvasElement>("aoi-canvas"));
    this.statusPage = new StatusPage(this.el("status-root"), this.api, pollIntervalMs);

    this.map.onChange = () => this.refreshSubmitGate();
    this.el("close-ring").addEventListener("click", () => this.map.closeRing());
    this.el("reset-ring").addEventListener("click", () => this.map.reset());
    this.el<HTMLInputElement>("email").addEventListener("input", () => this.refreshSubmitGate());
    this.el<HTMLSelectElement>("crop").addEventListener("change", () => this.refreshSubmitGate());
    this.el<HTMLFormElement>("request-form").addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    this.doc.defaultView?.addEventListener("hashchange", this.onHashChange);
  }

  /** Unhook window listeners and stop polling (tests swap apps on one window). */
  dispose(): void {
    this.doc.defaultView?.removeEventListener("hashchange", this.onHashChange);
    this.statusPage.dispose();
  }

  private el<T extends HTMLElement = HTMLElement>(id: string): T {
    const found = this.doc.getElementById(id);
    if (!found) throw new Error(`missing element #${id}`);
    return found as T;
  }

  async start(): Promise<void> {
    const crops = await this.api.getCrops();
    const select = this.el<HTMLSelectElement>("crop");
    for (const crop of crops) {
      const option = this.doc.createElement("option");
      option.value = crop.english_name;
      option.textContent = crop.lpis_name
        ? `${crop.english_name} (${crop.lpis_name})`
        : crop.english_name;
      select.appendChild(option);
    }
    this.refreshSubmitGate();
    await this.route();
  }

  formState() {
    return {
      email: this.el<HTMLInputElement>("email").value,
      crop: this.el<HTMLSelectElement>("crop").value,
      year: Number(this.el<HTMLInputElement>("year").value),
      ratioMode: this.el<HTMLSelectElement>("ratio-mode").value,
    };
  }

  refreshSubmitGate(): void {
    const button = this.el<HTMLButtonElement>("submit-button");
    button.disabled = !canSubmit(this.map.draft, this.formState());
  }

  private setError(id: string, text: string): void {
    this.el(id).textContent = text;
  }

  clearErrors(): void {
    for (const id of ["email-error", "map-error", "form-error"]) {
      this.setError(id, "");
    }
  }

  /** Posts the drawn polygon; distinct server rejections land inline, verbatim. */
  async submit(): Promise<string | null> {
    this.clearErrors();
    const geojson = this.map.draft.toGeoJSON();
    if (!geojson) {
      this.setError("map-error", "close the polygon before submitting");
      return null;
    }
    const state = this.formState();
    try {
      const requestId = await this.api.submitRequest({
        geojson,
        email: state.email,
        crop: state.crop,
        year: state.year,
        ratio_mode: state.ratioMode,
      });
      const win = this.doc.defaultView;
      if (win) {
        win.location.hash = `#/requests/${requestId}`;
      }
      await this.route();
      return requestId;
    } catch (err) {
      if (err instanceof ApiError) {
        if (err.code === "invalid_email") {
          this.setError("email-error", err.message);
        } else if (["aoi_too_large", "not_single_polygon", "invalid_polygon"].includes(err.code)) {
          this.setError("map-error", err.message);
        } else {
          this.setError("form-error", err.message);
        }
        return null;
      }
      this.setError("form-error", `network failure: ${String(err)} - try again`);
      return null;
    }
  }

  private shownRequestId: string | null = null;
  private showPromise: Promise<unknown> | null = null;

  /** Renders the job view for the id in the URL hash, once per id.

  Concurrent calls for the same id (the hashchange event racing a direct
  call) share one render, and both wait for it. */
  async route(): Promise<void> {
    const hash = this.doc.defaultView?.location.hash ?? "";
    const match = /^#\/requests\/([0-9a-f]+)$/.exec(hash);
    if (!match) return;
    if (match[1] !== this.shownRequestId) {
      this.shownRequestId = match[1];
      this.showPromise = this.statusPage.show(match[1]);
    }
    await this.showPromise;
  }
}

export function boot(): void {
  const app = new App(document);
  void app.start();
}

declare global {
  interface Window {
    sarfieldsApp?: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("request-form")) {
  const app = new App(document);
  window.sarfieldsApp = app;
  void app.start();
}
