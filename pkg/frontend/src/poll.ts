/** Job polling: one loop per job, stopping the moment a terminal state lands. */

import type { ApiClient } from "./api";
import type { JobPayload } from "./types";

export interface PollOptions {
  intervalMs?: number;
  maxPolls?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  client: Pick<ApiClient, "getJob">,
  jobId: string,
  onUpdate: (job: JobPayload) => void,
  options: PollOptions = {},
): Promise<JobPayload> {
  const intervalMs = options.intervalMs ?? 250;
  const maxPolls = options.maxPolls ?? 4000;
  const sleep = options.sleep ?? defaultSleep;
  for (let polls = 0; polls < maxPolls; polls++) {
    const job = await client.getJob(jobId);
    onUpdate(job);
    if (job.state === "done" || job.state === "failed") {
      return job;
    }
    await sleep(intervalMs);
  }
  throw new Error(`job ${jobId} did not finish within ${maxPolls} polls`);
}
