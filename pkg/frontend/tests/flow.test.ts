import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ClassifyFlow } from "../src/flow.js";

interface FakeItem {
  id: string;
  answers: Map<string, string>;
}

/** Minimal in-memory stand-in for the service, mounted behind fetch. */
function installFakeService(nItems: number): { items: FakeItem[] } {
  const items: FakeItem[] = Array.from({ length: nItems }, (_, i) => ({
    id: `item-${String(i).padStart(4, "0")}`,
    answers: new Map(),
  }));

  vi.stubGlobal("fetch", async (url: string, options?: RequestInit) => {
    const u = new URL(url, "http://fake");
    const respond = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), { status });

    if (u.pathname.endsWith("/next")) {
      const reader = u.searchParams.get("reader")!;
      const pending = items.find((it) => !it.answers.has(reader));
      const answered = items.filter((it) => it.answers.has(reader)).length;
      if (!pending) {
        return respond(200, { done: true, answered, total: items.length });
      }
      return respond(200, {
        done: false,
        item_id: pending.id,
        image_pgm_b64: "cGxhY2Vob2xkZXI=",
        answered,
        total: items.length,
      });
    }
    if (u.pathname.endsWith("/responses")) {
      const body = JSON.parse(String(options?.body));
      const item = items.find((it) => it.id === body.item_id);
      if (!item) {
        return respond(404, { error: { message: "unknown item" } });
      }
      if (item.answers.has(body.reader_id)) {
        return respond(409, { error: { message: "duplicate" } });
      }
      item.answers.set(body.reader_id, body.label);
      const answered = items.filter((it) => it.answers.has(body.reader_id)).length;
      return respond(201, { ok: true, answered, total: items.length });
    }
    return respond(404, { error: { message: "no route" } });
  });
  return { items };
}

describe("ClassifyFlow", () => {
  beforeEach(() => {
    vi.unstubAllGlobals();
  });

  it("walks a session to completion", async () => {
    const service = installFakeService(5);
    const flow = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    let state = await flow.advance();
    while (state.phase === "classify") {
      state = await flow.submit("real");
    }
    expect(state.phase).toBe("done");
    expect(state.answered).toBe(5);
    expect(service.items.every((it) => it.answers.get("r1") === "real")).toBe(true);
  });

  it("resumes at the first unanswered item after a refresh", async () => {
    installFakeService(3);
    const flow1 = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    await flow1.advance();
    await flow1.submit("fake");
    // refresh: a fresh flow instance picks up where the reader left off
    const flow2 = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    const state = await flow2.advance();
    expect(state.phase).toBe("classify");
    expect(state.answered).toBe(1);
    expect(state.item?.item_id).toBe("item-0001");
  });

  it("skips forward on conflict", async () => {
    const service = installFakeService(3);
    service.items[0].answers.set("r1", "real"); // already answered elsewhere
    const flow = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    const state = await flow.advance();
    // server already skips answered items, so we land on item-0001
    expect(state.item?.item_id).toBe("item-0001");
    const after = await flow.submit("fake");
    expect(after.item?.item_id).toBe("item-0002");
  });

  it("keeps the pending label across a network failure and retries", async () => {
    installFakeService(2);
    const flow = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    await flow.advance();

    const realFetch = globalThis.fetch;
    vi.stubGlobal("fetch", async () => {
      throw new TypeError("network down");
    });
    let state = await flow.submit("real");
    expect(state.phase).toBe("error");
    expect(state.pendingLabel).toBe("real");

    vi.stubGlobal("fetch", realFetch);
    state = await flow.retry();
    expect(state.phase).toBe("classify");
    expect(state.answered).toBe(1);
  });

  it("keyboard and click paths share the submit entry point", async () => {
    const service = installFakeService(2);
    const flow = new ClassifyFlow(new ApiClient("http://fake"), "s1", "r1");
    await flow.advance();
    await flow.submit("real"); // "click"
    await flow.submit("fake"); // "keyboard" lands on the same method
    expect(service.items[0].answers.get("r1")).toBe("real");
    expect(service.items[1].answers.get("r1")).toBe("fake");
  });
});
