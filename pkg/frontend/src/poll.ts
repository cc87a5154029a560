/** Poll a run until it reaches a terminal state. */

import type { ApiClient } from "./api.js";
import type { RunPayload } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onTick?: (payload: RunPayload) => void;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export async function pollRun(
  client: ApiClient,
  runId: string,
  options: PollOptions = {},
): Promise<RunPayload> {
  const interval = options.intervalMs ?? 400;
  const deadline = Date.now() + (options.timeoutMs ?? 120_000);
  for (;;) {
    const payload = await client.getRun(runId);
    options.onTick?.(payload);
    if (payload.status === "done") {
      return payload;
    }
    if (payload.status === "failed") {
      throw new Error(payload.error ?? "verification run failed");
    }
    if (Date.now() > deadline) {
      throw new Error(`run ${runId} did not finish before the timeout`);
    }
    await sleep(interval);
  }
}
