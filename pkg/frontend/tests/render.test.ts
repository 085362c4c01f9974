// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import type { Snapshot, WidgetSnapshot } from "../src/protocol.js";
import { renderSnapshot, renderTimeline } from "../src/render.js";

function snap(widgets: WidgetSnapshot[], value: unknown = null): Snapshot {
  return { widgets, t: 0, value, trace: [], steps: 0, horizon: 16 };
}

function canvas(): HTMLElement {
  const el = document.createElement("div");
  document.body.appendChild(el);
  return el;
}

describe("renderSnapshot", () => {
  it("renders one element per widget", () => {
    const el = canvas();
    renderSnapshot(
      el,
      snap([
        { id: 0, color: "Red", handlers: ["click"], children: [] },
        { id: 1, color: null, handlers: [], children: [] },
      ]),
    );
    const widgets = el.querySelectorAll(".widget");
    expect(widgets).toHaveLength(2);
    expect((widgets[0] as HTMLElement).dataset.widgetId).toBe("0");
    expect((widgets[1] as HTMLElement).dataset.widgetId).toBe("1");
  });

  it("maps colors onto the element", () => {
    const el = canvas();
    renderSnapshot(el, snap([{ id: 0, color: "Blue", handlers: [], children: [] }]));
    const w = el.querySelector(".widget") as HTMLElement;
    expect(w.dataset.color).toBe("Blue");
    expect(w.style.backgroundColor).not.toBe("transparent");
  });

  it("nests children inside their parent element", () => {
    const el = canvas();
    renderSnapshot(
      el,
      snap([
        {
          id: 0,
          color: null,
          handlers: [],
          children: [{ id: 1, color: "Green", handlers: [], children: [] }],
        },
      ]),
    );
    const parent = el.querySelector('[data-widget-id="0"]')!;
    const child = parent.querySelector('[data-widget-id="1"]');
    expect(child).not.toBeNull();
    expect(el.querySelectorAll(".widget")).toHaveLength(2);
  });

  it("shows a notice for an empty widget set", () => {
    const el = canvas();
    renderSnapshot(el, snap([]));
    expect(el.querySelector(".empty-notice")?.textContent).toBe("no widgets");
    expect(el.querySelectorAll(".widget")).toHaveLength(0);
  });

  it("shows an error banner for a malformed snapshot and renders nothing partial", () => {
    const el = canvas();
    const bad = snap([
      { id: 0, color: null, handlers: [], children: [] },
      { id: "nope" } as unknown as WidgetSnapshot,
    ]);
    renderSnapshot(el, bad);
    expect(el.querySelector(".error-banner")?.textContent).toBe("malformed snapshot");
    expect(el.querySelectorAll(".widget")).toHaveLength(0);
  });

  it("forwards clicks and focus to the callbacks", () => {
    const el = canvas();
    const onWidgetClick = vi.fn();
    const onWidgetFocus = vi.fn();
    renderSnapshot(el, snap([{ id: 3, color: null, handlers: ["click"], children: [] }]), {
      onWidgetClick,
      onWidgetFocus,
    });
    (el.querySelector(".widget") as HTMLElement).click();
    expect(onWidgetClick).toHaveBeenCalledWith(3);
    expect(onWidgetFocus).toHaveBeenCalledWith(3);
  });
});

describe("renderTimeline", () => {
  it("renders logbook entries in time order across widgets", () => {
    const el = canvas();
    const value = {
      pair: [
        { widget: 0, children: [], log: [[4, "setColor", "Red"], [1, "onClick"]] },
        { widget: 1, children: [], log: [[2, "onKeypress"]] },
      ],
    };
    renderTimeline(el, snap([], value));
    const rows = [...el.querySelectorAll(".timeline-entry")].map((r) => r.textContent);
    expect(rows).toEqual([
      "t=1 widget#0 onClick",
      "t=2 widget#1 onKeypress",
      "t=4 widget#0 setColor Red",
    ]);
  });

  it("puts entries at time inf last", () => {
    const el = canvas();
    const value = { widget: 0, children: [], log: [["inf", "onClick"], [3, "setColor", "Blue"]] };
    renderTimeline(el, snap([], value));
    const rows = [...el.querySelectorAll(".timeline-entry")].map((r) => r.textContent);
    expect(rows[rows.length - 1]).toBe("t=inf widget#0 onClick");
  });
});
