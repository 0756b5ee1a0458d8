import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { PollSuperseded, StatusPoller } from "../src/poll.js";
import type { StatusView } from "../src/types.js";

function sequencedApi(statuses: string[]): ApiClient {
  let call = 0;
  const impl = async (): Promise<Response> => {
    const status = statuses[Math.min(call, statuses.length - 1)];
    call += 1;
    const view: Partial<StatusView> = { request_id: "id", status: status as StatusView["status"] };
    return new Response(JSON.stringify(view), { status: 200 });
  };
  return new ApiClient("", impl);
}

describe("StatusPoller", () => {
  it("polls until a terminal status and reports every update", async () => {
    const api = sequencedApi(["pending", "processing", "processing", "done"]);
    const seen: string[] = [];
    const poller = new StatusPoller(api, 1);
    const final = await poller.poll("id", (view) => seen.push(view.status));
    expect(final.status).toBe("done");
    expect(seen).toEqual(["pending", "processing", "processing", "done"]);
  });

  it("rejects a superseded poll so its awaiter can unwind", async () => {
    const api = sequencedApi(["pending", "pending", "done"]);
    const poller = new StatusPoller(api, 50);
    const first = poller.poll("id", () => undefined);
    const firstOutcome = first.catch((e: unknown) => e);
    const second = await poller.poll("id", () => undefined);
    expect(second.status).toBe("done");
    expect(await firstOutcome).toBeInstanceOf(PollSuperseded);
  });
});
