import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, StaticClient } from "../src/api.js";

function stubFetch(status: number, body: unknown): typeof fetch {
  return vi.fn(async () =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    }),
  ) as unknown as typeof fetch;
}

describe("ApiClient", () => {
  afterEach(() => vi.unstubAllGlobals());

  it("builds documented URLs", async () => {
    const stub = stubFetch(200, ["s1"]);
    vi.stubGlobal("fetch", stub);
    const client = new ApiClient("http://x:1");
    await client.listSessions();
    await client.manifest("s1");
    await client.lesions("s1");
    const urls = (stub as ReturnType<typeof vi.fn>).mock.calls.map(
      (c) => c[0] as string,
    );
    expect(urls).toEqual([
      "http://x:1/api/sessions",
      "http://x:1/api/sessions/s1/manifest",
      "http://x:1/api/sessions/s1/lesions",
    ]);
    expect(client.imageUrl("s1", "A2")).toBe(
      "http://x:1/api/sessions/s1/images/A2",
    );
  });

  it("PATCH sends JSON body and surfaces failures", async () => {
    const stub = stubFetch(404, { detail: "nope" });
    vi.stubGlobal("fetch", stub);
    const client = new ApiClient("http://x:1");
    await expect(
      client.patchDetection("s1", "A2", 3, { removed: true }),
    ).rejects.toBeInstanceOf(ApiError);
    const [, init] = (stub as ReturnType<typeof vi.fn>).mock.calls[0];
    expect(init.method).toBe("PATCH");
    expect(JSON.parse(init.body as string)).toEqual({ removed: true });
  });

  it("tracks absent -> null, other errors propagate", async () => {
    vi.stubGlobal("fetch", stubFetch(404, { detail: "missing" }));
    const client = new ApiClient("http://x:1");
    expect(await client.tracks("s1")).toBeNull();
    vi.stubGlobal("fetch", stubFetch(500, { detail: "broken" }));
    await expect(client.tracks("s1")).rejects.toBeInstanceOf(ApiError);
  });
});

describe("StaticClient", () => {
  it("reads flat files and refuses edits", async () => {
    vi.stubGlobal("fetch", stubFetch(200, { lesions: [], rejected: [] }));
    const client = new StaticClient("/export");
    await client.lesions("s1");
    const url = (fetch as ReturnType<typeof vi.fn>).mock.calls[0][0];
    expect(url).toBe("/export/s1/lesions3d.json");
    expect(client.imageUrl("s1", "A2")).toBe("/export/s1/images/A2.png");
    await expect(client.patchDetection()).rejects.toBeInstanceOf(ApiError);
    vi.unstubAllGlobals();
  });
});
