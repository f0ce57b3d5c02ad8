import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, SurveyApi } from "../src/api.js";

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("SurveyApi.submitAnswer", () => {
  it("retries after a network failure (server deduplicates)", async () => {
    let calls = 0;
    vi.stubGlobal("fetch", async () => {
      calls += 1;
      if (calls === 1) throw new TypeError("network down");
      return new Response(JSON.stringify({ status: "ok", duplicate: false, stored: true }), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    });
    const api = new SurveyApi("http://x");
    const ack = await api.submitAnswer("s", "q", ["a"]);
    expect(calls).toBe(2);
    expect(ack.stored).toBe(true);
  });

  it("does not retry when the server rejected the answer", async () => {
    let calls = 0;
    vi.stubGlobal("fetch", async () => {
      calls += 1;
      return new Response(JSON.stringify({ detail: "invalid" }), { status: 422 });
    });
    const api = new SurveyApi("http://x");
    await expect(api.submitAnswer("s", "q", ["a"])).rejects.toThrowError(ApiError);
    expect(calls).toBe(1);
  });

  it("gives up after exhausting retries", async () => {
    vi.stubGlobal("fetch", async () => {
      throw new TypeError("network down");
    });
    const api = new SurveyApi("http://x");
    await expect(api.submitAnswer("s", "q", ["a"], 1)).rejects.toThrow("network down");
  });

  it("surfaces error details from the body", async () => {
    vi.stubGlobal("fetch", async () => {
      return new Response(JSON.stringify({ detail: "bank saturated" }), { status: 409 });
    });
    const api = new SurveyApi("http://x");
    await expect(api.createSession("p", "b")).rejects.toThrow("bank saturated");
  });
});
