import { ApiClient, ApiError } from "./api.js";
import { buildSeriesChart, buildSeriesTable } from "./chart.js";
import { PollSuperseded, StatusPoller } from "./poll.js";
import type { StatusView } from "./types.js";

/**
 * Job view for one request id. All state comes from the API, so a fresh
 * instance pointed at the same id (a page reload) reconstructs the view.
 */
export class StatusPage {
  private readonly poller: StatusPoller;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    intervalMs = 2000,
  ) {
    this.poller = new StatusPoller(api, intervalMs);
  }

  dispose(): void {
    this.poller.stop();
  }

  async show(requestId: string): Promise<StatusView | null> {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren();

    const heading = doc.createElement("h2");
    heading.textContent = `Request ${requestId}`;
    const statusLine = doc.createElement("p");
    statusLine.className = "status-line";
    const spinner = doc.createElement("div");
    spinner.className = "spinner";
    const body = doc.createElement("div");
    body.className = "status-body";
    this.root.append(heading, statusLine, spinner, body);

    const render = (view: StatusView) => {
      statusLine.textContent = `status: ${view.status}`;
      statusLine.dataset.status = view.status;
      spinner.style.display = view.status === "pending" || view.status === "processing" ? "" : "none";
    };

    let finalView: StatusView;
    try {
      finalView = await this.poller.poll(requestId, render);
    } catch (err) {
      if (err instanceof PollSuperseded) {
        return null; // a newer view owns the page now
      }
      if (err instanceof ApiError && err.status === 404) {
        heading.textContent = "Unknown request";
        statusLine.textContent = "This link does not match any request on the server.";
        statusLine.dataset.status = "missing";
        spinner.style.display = "none";
        return null;
      }
      throw err;
    }

    if (finalView.status === "failed") {
      const panel = doc.createElement("div");
      panel.className = "error-panel";
      panel.textContent = finalView.message ?? "processing failed";
      body.appendChild(panel);
      return finalView;
    }

    const summary = doc.createElement("p");
    summary.className = "summary";
    summary.textContent =
      `${finalView.crop} ${finalView.year}: ${finalView.scene_count} scenes, ` +
      `${finalView.parcel_count} parcels`;
    body.appendChild(summary);

    const download = doc.createElement("a");
    download.className = "download-button";
    download.href = this.api.bundleUrl(requestId);
    download.textContent = "Download bundle (zip)";
    body.appendChild(download);

    const series = await this.api.getTimeSeries(requestId);
    body.appendChild(buildSeriesChart(doc, series.parcels));
    body.appendChild(buildSeriesTable(doc, series.parcels));
    return finalView;
  }
}
