// Playground wiring: load a program through the protocol, render server
// snapshots, and forward real user gestures as protocol events with
// auto-incrementing logical time.

import { Client, ProtocolError, Snapshot } from "./protocol.js";
import { renderSnapshot, renderTimeline } from "./render.js";

export class Playground {
  private session: string | null = null;
  private clock = 0; // logical time of the last sent stimulus
  private step = 1; // gap added per user gesture (time-scrub control)
  private focused: number | null = null;
  readonly eventLog: { stimulus: object; ok: boolean }[] = [];

  constructor(
    private client: Client,
    private canvas: HTMLElement,
    private timeline: HTMLElement,
    private status: HTMLElement,
  ) {}

  setStep(step: number): void {
    this.step = Math.max(1, Math.floor(step));
  }

  private show(snapshot: Snapshot): void {
    renderSnapshot(this.canvas, snapshot, {
      onWidgetClick: (id) => void this.sendEvent(id, "click"),
      onWidgetFocus: (id) => {
        this.focused = id;
      },
    });
    renderTimeline(this.timeline, snapshot);
  }

  async load(source: string, horizon = 16): Promise<void> {
    this.session = null;
    this.clock = 0;
    this.focused = null;
    this.eventLog.length = 0;
    try {
      const ok = await this.client.load(source, horizon);
      this.session = ok.session;
      this.status.textContent = `loaded ${ok.entry} (horizon ${ok.horizon})`;
      this.show(ok.snapshot);
    } catch (e) {
      this.status.textContent = e instanceof ProtocolError ? `${e.kind}: ${e.message}` : String(e);
    }
  }

  /** Forward one user gesture. Logical time advances by the scrub step. */
  async sendEvent(widget: number, kind: "click" | "keypress", char?: string): Promise<void> {
    if (!this.session) return;
    const t = this.clock + this.step;
    const stimulus =
      kind === "keypress" ? { t, widget, kind, char: char ?? "a" } : { t, widget, kind };
    try {
      const snapshot = await this.client.event(this.session, stimulus as never);
      this.clock = t;
      this.eventLog.push({ stimulus, ok: true });
      this.show(snapshot);
    } catch (e) {
      this.eventLog.push({ stimulus, ok: false });
      this.status.textContent =
        e instanceof ProtocolError ? `${e.kind}: ${e.message}` : String(e);
    }
  }

  /** Keypresses go to the last focused widget (click-to-focus). */
  async sendKeypress(char: string): Promise<void> {
    if (this.focused === null) return;
    await this.sendEvent(this.focused, "keypress", char);
  }
}

export function mount(root: Document, serverUrl: string): Playground {
  const canvas = root.getElementById("canvas")!;
  const timeline = root.getElementById("timeline")!;
  const status = root.getElementById("status")!;
  const source = root.getElementById("source") as HTMLTextAreaElement;
  const loadBtn = root.getElementById("load")!;
  const stepInput = root.getElementById("step") as HTMLInputElement | null;

  const playground = new Playground(new Client(serverUrl), canvas, timeline, status);
  loadBtn.addEventListener("click", () => void playground.load(source.value));
  stepInput?.addEventListener("change", () => playground.setStep(Number(stepInput.value)));
  root.addEventListener("keydown", (ev) => {
    const kev = ev as KeyboardEvent;
    if (kev.key.length === 1) void playground.sendKeypress(kev.key);
  });
  return playground;
}
