// Service client: REST calls, the SSE subscription with resync on
// reconnect, and a retry queue so actions submitted during an outage are
// replayed once the link returns (with a visible pending badge).

import { Ack, AutomatonSnapshot, GanttPayload, LogRecord, RunState } from "./types.js";
import { Intervention, validateIntervention } from "./interventions.js";

export class ApiClient {
  constructor(readonly base: string = "") {}

  async startRun(seed: number, rate: number): Promise<Record<string, unknown>> {
    return this.postJson("/run", { seed, rate });
  }

  async state(): Promise<RunState> {
    return this.getJson("/run/state") as Promise<RunState>;
  }

  async gantt(): Promise<GanttPayload> {
    return this.getJson("/run/gantt") as Promise<GanttPayload>;
  }

  async automata(): Promise<AutomatonSnapshot[]> {
    return this.getJson("/run/automata") as Promise<AutomatonSnapshot[]>;
  }

  async intervene(iv: Intervention): Promise<Ack> {
    const problems = validateIntervention(iv);
    if (problems.length) {
      return { accepted: false, reason: problems.join("; "), t: null };
    }
    const resp = await fetch(this.base + "/run/intervention", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(iv),
    });
    return (await resp.json()) as Ack;
  }

  private async getJson(path: string): Promise<unknown> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) throw new Error(`${path}: HTTP ${resp.status}`);
    return resp.json();
  }

  private async postJson(path: string, body: unknown): Promise<Record<string, unknown>> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await resp.json()) as Record<string, unknown>;
  }
}

export interface PendingAction {
  iv: Intervention;
  attempts: number;
}

// Queue of actions awaiting acknowledgment; retried on reconnect.
export class RetryQueue {
  pending: PendingAction[] = [];

  constructor(private client: ApiClient,
              private onSettle: (iv: Intervention, ack: Ack) => void) {}

  async submit(iv: Intervention): Promise<void> {
    this.pending.push({ iv, attempts: 0 });
    await this.flush();
  }

  async flush(): Promise<void> {
    const queue = this.pending;
    this.pending = [];
    for (const action of queue) {
      try {
        const ack = await this.client.intervene(action.iv);
        this.onSettle(action.iv, ack);
      } catch {
        action.attempts += 1;
        if (action.attempts < 5) {
          this.pending.push(action);
        } else {
          this.onSettle(action.iv, {
            accepted: false, reason: "unreachable after retries", t: null,
          });
        }
      }
    }
  }

  get badge(): number {
    return this.pending.length;
  }
}

export function subscribeEvents(base: string,
                                onRecord: (rec: LogRecord) => void,
                                onEnd: () => void,
                                fromCursor = 0): EventSource {
  // EventSource reconnects automatically; the cursor query resyncs missed
  // records after a drop.
  let cursor = fromCursor;
  const source = new EventSource(`${base}/run/events?cursor=${cursor}`);
  source.onmessage = (msg) => {
    const rec = JSON.parse(msg.data) as LogRecord;
    cursor += 1;
    onRecord(rec);
  };
  source.addEventListener("end", () => {
    source.close();
    onEnd();
  });
  return source;
}
