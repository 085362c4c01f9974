// End-to-end round trip: a scripted browser session against a live server
// must produce the same final logbook as the command-line runner fed an
// equivalent stimulus trace.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/protocol.js";

const REPO = resolve(__dirname, "..", "..");
const CORPUS = join(REPO, "corpus");

/** Canonical JSON: recursively sorted object keys, no whitespace. Matches
 * the canonical form the command-line tools print. */
function stableStringify(v: unknown): string {
  if (Array.isArray(v)) return `[${v.map(stableStringify).join(",")}]`;
  if (typeof v === "object" && v !== null) {
    const entries = Object.keys(v as object)
      .sort()
      .map((k) => `${JSON.stringify(k)}:${stableStringify((v as Record<string, unknown>)[k])}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(v);
}

let proc: ChildProcess;
let url: string;

beforeAll(async () => {
  proc = spawn("lwidget", ["serve", "--port", "0"], { stdio: ["ignore", "pipe", "pipe"] });
  url = await new Promise<string>((resolveUrl, reject) => {
    let buf = "";
    proc.stdout!.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
      const m = buf.match(/listening on (http:\/\/[\d.]+:\d+)/);
      if (m) resolveUrl(m[1]);
    });
    proc.on("error", reject);
    proc.on("exit", (code) => reject(new Error(`server exited early (${code})`)));
    setTimeout(() => reject(new Error("server did not start")), 15000);
  });
}, 20000);

afterAll(() => {
  proc?.kill();
});

describe("playground round trip", () => {
  it("click session matches the command-line run byte for byte", async () => {
    const source = readFileSync(join(CORPUS, "turn_red.lw"), "utf8");
    const horizon = 16;
    const client = new Client(url);

    const ok = await client.load(source, horizon);
    expect(ok.entry).toBe("turnRedOnClick");
    expect(ok.snapshot.widgets).toHaveLength(1);

    const stimulus = { t: 2, widget: 0, kind: "click" as const };
    await client.event(ok.session, stimulus);
    const finalSnap = await client.snapshot(ok.session);
    expect(finalSnap.trace).toEqual([stimulus]);

    const dir = mkdtempSync(join(tmpdir(), "lw-e2e-"));
    const tracePath = join(dir, "trace.jsonl");
    writeFileSync(tracePath, JSON.stringify(stimulus) + "\n");
    const run = spawnSync(
      "lwidget",
      [
        "run",
        join(CORPUS, "turn_red.lw"),
        "--trace",
        tracePath,
        "--horizon",
        String(horizon),
      ],
      { encoding: "utf8" },
    );
    expect(run.status).toBe(0);
    const cliValue = JSON.parse(run.stdout).value;

    expect(stableStringify(finalSnap.value)).toBe(stableStringify(cliValue));
  }, 20000);

  it("rejected events leave the session unchanged", async () => {
    const source = readFileSync(join(CORPUS, "turn_red.lw"), "utf8");
    const client = new Client(url);
    const ok = await client.load(source, 8);

    const before = stableStringify(await client.snapshot(ok.session));
    const err = await client
      .event(ok.session, { t: 1, widget: 42, kind: "click" })
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).not.toBeNull();
    const after = stableStringify(await client.snapshot(ok.session));
    expect(after).toBe(before);
  });
});
