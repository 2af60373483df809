import { describe, expect, it } from "vitest";
import { Api, ApiError, FetchLike } from "../src/api.js";

interface Seen {
  url: string;
  method: string;
  body: unknown;
}

function recordingFetch(
  status: number,
  payload: unknown,
): { fetch: FetchLike; seen: Seen[] } {
  const seen: Seen[] = [];
  const fetch: FetchLike = async (url, init) => {
    seen.push({
      url,
      method: init?.method ?? "GET",
      body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
    });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch, seen };
}

describe("Api", () => {
  it("prefixes every path with the base URL", async () => {
    const { fetch, seen } = recordingFetch(200, []);
    const api = new Api("http://127.0.0.1:9", fetch);
    await api.images();
    expect(seen[0]!.url).toBe("http://127.0.0.1:9/api/v1/images");
    expect(api.imageFileUrl(3)).toBe("http://127.0.0.1:9/api/v1/images/3/file");
  });

  it("posts annotation payloads as JSON", async () => {
    const { fetch, seen } = recordingFetch(200, { version: 1 });
    const api = new Api("", fetch);
    await api.saveAnnotations(2, [{ bbox: [1, 2, 3, 4], category_id: 1 }]);
    expect(seen[0]).toEqual({
      url: "/api/v1/images/2/annotations",
      method: "POST",
      body: { annotations: [{ bbox: [1, 2, 3, 4], category_id: 1 }] },
    });
  });

  it("escapes GCP names in the candidates query", async () => {
    const { fetch, seen } = recordingFetch(200, { candidates: [] });
    await new Api("", fetch).candidates("plot 7/a");
    expect(seen[0]!.url).toBe("/api/v1/gcps/candidates?gcp=plot%207%2Fa");
  });

  it("sends export requests as parameterised POSTs", async () => {
    const { fetch, seen } = recordingFetch(200, { written: "x", lines: 2 });
    await new Api("", fetch).export("gcp_list");
    expect(seen[0]!.url).toBe("/api/v1/export?format=gcp_list");
    expect(seen[0]!.method).toBe("POST");
  });

  it("surfaces server error bodies as ApiError", async () => {
    const { fetch } = recordingFetch(409, { error: "bbox outside image" });
    const api = new Api("", fetch);
    const err = await api.images().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(409);
    expect((err as ApiError).message).toBe("bbox outside image");
  });

  it("falls back to the status text for non-JSON errors", async () => {
    const fetch: FetchLike = async () =>
      new Response("<html>boom</html>", {
        status: 502,
        statusText: "Bad Gateway",
      });
    const err = await new Api("", fetch).project().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).message).toBe("Bad Gateway");
  });
});
