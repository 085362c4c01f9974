// Client for the playground wire protocol. All server interaction goes
// through this module; nothing else in the front end talks to the network.

export interface WidgetSnapshot {
  id: number;
  color: string | null;
  handlers: string[];
  children: WidgetSnapshot[];
}

export type LogEntry = [number | "inf", string, ...unknown[]];

export interface Snapshot {
  widgets: WidgetSnapshot[];
  t: number;
  value: unknown;
  trace: StimulusRecord[];
  steps: number;
  horizon: number;
}

export interface StimulusRecord {
  t: number;
  widget: number;
  kind: "click" | "keypress";
  char?: string;
}

export interface LoadOk {
  session: string;
  entry: string;
  horizon: number;
  types: Record<string, string>;
  snapshot: Snapshot;
}

export class ProtocolError extends Error {
  constructor(
    public kind: string,
    message: string,
  ) {
    super(message);
  }
}

type Fetch = typeof fetch;

export class Client {
  constructor(
    private url: string,
    private fetchImpl: Fetch = fetch,
  ) {}

  private async post(doc: Record<string, unknown>): Promise<Record<string, unknown>> {
    const resp = await this.fetchImpl(this.url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(doc),
    });
    const out = (await resp.json()) as Record<string, unknown>;
    if (typeof out.error === "string") {
      throw new ProtocolError(out.error, String(out.message ?? out.error));
    }
    return out;
  }

  async load(source: string, horizon = 16, entry?: string): Promise<LoadOk> {
    const doc: Record<string, unknown> = { op: "load", source, horizon };
    if (entry !== undefined) doc.entry = entry;
    const out = await this.post(doc);
    return out.ok as unknown as LoadOk;
  }

  async event(session: string, stimulus: StimulusRecord): Promise<Snapshot> {
    const out = await this.post({ op: "event", session, ...stimulus });
    return (out.ok as { snapshot: Snapshot }).snapshot;
  }

  async snapshot(session: string, t?: number): Promise<Snapshot> {
    const doc: Record<string, unknown> = { op: "snapshot", session };
    if (t !== undefined) doc.t = t;
    const out = await this.post(doc);
    return out.snapshot as unknown as Snapshot;
  }
}
