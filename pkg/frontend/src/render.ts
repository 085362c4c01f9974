// Pure snapshot-to-DOM rendering. The canvas always shows exactly the last
// server snapshot: there is no client-side simulation of any kind.

import type { Snapshot, WidgetSnapshot } from "./protocol.js";

export interface RenderCallbacks {
  onWidgetClick?(id: number): void;
  onWidgetFocus?(id: number): void;
}

const COLOR_CSS: Record<string, string> = {
  Red: "#d33",
  Green: "#3a4",
  Blue: "#36c",
};

function widgetElement(
  doc: Document,
  w: WidgetSnapshot,
  cb: RenderCallbacks,
): HTMLElement {
  const el = doc.createElement("div");
  el.className = "widget";
  el.dataset.widgetId = String(w.id);
  el.dataset.color = w.color ?? "";
  el.style.backgroundColor = w.color ? (COLOR_CSS[w.color] ?? w.color) : "transparent";
  el.tabIndex = 0; // click-to-focus so keypresses have a target

  const label = doc.createElement("span");
  label.className = "widget-label";
  const handlers = w.handlers.length ? ` [${w.handlers.join(", ")}]` : "";
  label.textContent = `#${w.id} ${w.color ?? "unset"}${handlers}`;
  el.appendChild(label);

  el.addEventListener("click", (ev) => {
    ev.stopPropagation();
    cb.onWidgetFocus?.(w.id);
    cb.onWidgetClick?.(w.id);
  });
  el.addEventListener("focus", () => cb.onWidgetFocus?.(w.id));

  for (const child of w.children) {
    el.appendChild(widgetElement(doc, child, cb));
  }
  return el;
}

function isWidgetSnapshot(w: unknown): w is WidgetSnapshot {
  if (typeof w !== "object" || w === null) return false;
  const o = w as Record<string, unknown>;
  return (
    typeof o.id === "number" &&
    (o.color === null || typeof o.color === "string") &&
    Array.isArray(o.handlers) &&
    Array.isArray(o.children) &&
    (o.children as unknown[]).every(isWidgetSnapshot)
  );
}

/** Replace the canvas contents with the widgets of a snapshot.
 *
 * A malformed snapshot produces an error banner and leaves nothing
 * partially rendered. An empty widget set shows a notice instead of a
 * blank canvas.
 */
export function renderSnapshot(
  canvas: HTMLElement,
  snapshot: Snapshot,
  cb: RenderCallbacks = {},
): void {
  const doc = canvas.ownerDocument;
  if (!snapshot || !Array.isArray(snapshot.widgets) || !snapshot.widgets.every(isWidgetSnapshot)) {
    canvas.replaceChildren();
    const banner = doc.createElement("div");
    banner.className = "error-banner";
    banner.textContent = "malformed snapshot";
    canvas.appendChild(banner);
    return;
  }
  const fresh: HTMLElement[] = [];
  if (snapshot.widgets.length === 0) {
    const notice = doc.createElement("div");
    notice.className = "empty-notice";
    notice.textContent = "no widgets";
    fresh.push(notice);
  } else {
    for (const w of snapshot.widgets) {
      fresh.push(widgetElement(doc, w, cb));
    }
  }
  canvas.replaceChildren(...fresh);
}

/** Render the logbook inspector: one timeline row per logbook entry of
 * every widget in the snapshot value, ordered by time. */
export function renderTimeline(container: HTMLElement, snapshot: Snapshot): void {
  const doc = container.ownerDocument;
  const rows: { time: number | "inf"; text: string }[] = [];

  const visit = (v: unknown): void => {
    if (Array.isArray(v)) {
      v.forEach(visit);
      return;
    }
    if (typeof v !== "object" || v === null) return;
    const o = v as Record<string, unknown>;
    if ((typeof o.widget === "number" || typeof o.prefix === "number") && Array.isArray(o.log)) {
      const ident = (o.widget ?? o.prefix) as number;
      for (const entry of o.log as unknown[][]) {
        const [time, name, ...args] = entry as [number | "inf", string, ...unknown[]];
        const argText = args.length ? ` ${args.join(" ")}` : "";
        rows.push({ time, text: `t=${time} widget#${ident} ${name}${argText}` });
      }
    }
    Object.values(o).forEach(visit);
  };
  visit(snapshot.value);
  rows.sort((a, b) => {
    const ta = a.time === "inf" ? Infinity : a.time;
    const tb = b.time === "inf" ? Infinity : b.time;
    return ta - tb;
  });

  const fresh = rows.map((r) => {
    const row = doc.createElement("div");
    row.className = "timeline-entry";
    row.textContent = r.text;
    return row;
  });
  container.replaceChildren(...fresh);
}
