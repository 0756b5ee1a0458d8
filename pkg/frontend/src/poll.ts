import type { ApiClient } from "./api.js";
import type { StatusView } from "./types.js";

const TERMINAL = new Set(["done", "failed"]);

/** Raised into a poll superseded by a newer one so its awaiter can unwind. */
export class PollSuperseded extends Error {
  constructor() {
    super("poll superseded by a newer request view");
  }
}

/**
 * Poll a request until it settles. One in-flight cycle per poller; calling
 * stop() (or starting a new poll on the same handle) cancels the previous
 * loop, whose promise rejects with PollSuperseded.
 */
export class StatusPoller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private generation = 0;
  private supersede: (() => void) | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly intervalMs = 2000,
  ) {}

  stop(): void {
    this.generation += 1;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.supersede?.();
    this.supersede = null;
  }

  poll(requestId: string, onUpdate: (view: StatusView) => void): Promise<StatusView> {
    this.stop();
    const generation = this.generation;
    return new Promise((resolve, reject) => {
      this.supersede = () => reject(new PollSuperseded());
      const cycle = async () => {
        if (generation !== this.generation) return;
        let view: StatusView;
        try {
          view = await this.api.getStatus(requestId);
        } catch (err) {
          reject(err);
          return;
        }
        if (generation !== this.generation) return;
        onUpdate(view);
        if (TERMINAL.has(view.status)) {
          this.supersede = null;
          resolve(view);
          return;
        }
        this.timer = setTimeout(cycle, this.intervalMs);
      };
      void cycle();
    });
  }
}
