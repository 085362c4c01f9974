import { describe, expect, it, vi } from "vitest";

import { Client, ProtocolError } from "../src/protocol.js";

function fakeFetch(response: unknown) {
  return vi.fn(async () => ({ json: async () => response })) as unknown as typeof fetch;
}

const SNAPSHOT = { widgets: [], t: 0, value: null, trace: [], steps: 0, horizon: 16 };

describe("Client", () => {
  it("sends a load request with source and horizon", async () => {
    const fetchImpl = fakeFetch({
      ok: { session: "s1", entry: "main", horizon: 16, types: {}, snapshot: SNAPSHOT },
    });
    const client = new Client("http://x/", fetchImpl);
    const ok = await client.load("main : I = ();", 16);
    expect(ok.session).toBe("s1");
    const [url, init] = (fetchImpl as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(url).toBe("http://x/");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body)).toEqual({ op: "load", source: "main : I = ();", horizon: 16 });
  });

  it("sends event requests with the stimulus fields inline", async () => {
    const fetchImpl = fakeFetch({ ok: { snapshot: SNAPSHOT } });
    const client = new Client("http://x/", fetchImpl);
    const snap = await client.event("s1", { t: 3, widget: 0, kind: "keypress", char: "q" });
    expect(snap).toEqual(SNAPSHOT);
    const [, init] = (fetchImpl as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(JSON.parse(init.body)).toEqual({
      op: "event",
      session: "s1",
      t: 3,
      widget: 0,
      kind: "keypress",
      char: "q",
    });
  });

  it("sends snapshot requests, omitting t when not given", async () => {
    const fetchImpl = fakeFetch({ snapshot: SNAPSHOT });
    const client = new Client("http://x/", fetchImpl);
    await client.snapshot("s1");
    await client.snapshot("s1", 4);
    const calls = (fetchImpl as ReturnType<typeof vi.fn>).mock.calls;
    expect(JSON.parse(calls[0][1].body)).toEqual({ op: "snapshot", session: "s1" });
    expect(JSON.parse(calls[1][1].body)).toEqual({ op: "snapshot", session: "s1", t: 4 });
  });

  it("raises ProtocolError with the server's error kind and message", async () => {
    const fetchImpl = fakeFetch({ error: "TraceTargetInvalid", message: "no widget 9" });
    const client = new Client("http://x/", fetchImpl);
    const err = await client
      .event("s1", { t: 1, widget: 9, kind: "click" })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ProtocolError);
    expect((err as ProtocolError).kind).toBe("TraceTargetInvalid");
    expect((err as ProtocolError).message).toBe("no widget 9");
  });
});
