import type {
  AnnotationDoc,
  AnnotationSaveResponse,
  ApiAnnotation,
  CandidatesDoc,
  ExportResponse,
  GcpMark,
  ImageEntry,
  MarksDoc,
  MarksSaveResponse,
  PreviewDoc,
  ProjectInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the /api/v1 endpoints. */
export class Api {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly base = "",
    fetchFn?: FetchLike,
  ) {
    // wrap rather than store the global directly: browser fetch throws
    // "illegal invocation" when called detached from globalThis
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      // non-JSON error page; fall through with the status line only
    }
    if (!resp.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
  }

  project(): Promise<ProjectInfo> {
    return this.json("/api/v1/project");
  }

  images(): Promise<ImageEntry[]> {
    return this.json("/api/v1/images");
  }

  imageFileUrl(imageId: number): string {
    return `${this.base}/api/v1/images/${imageId}/file`;
  }

  annotations(imageId: number): Promise<AnnotationDoc> {
    return this.json(`/api/v1/images/${imageId}/annotations`);
  }

  saveAnnotations(
    imageId: number,
    annotations: ApiAnnotation[],
  ): Promise<AnnotationSaveResponse> {
    return this.post(`/api/v1/images/${imageId}/annotations`, { annotations });
  }

  gcps(): Promise<MarksDoc> {
    return this.json("/api/v1/gcps");
  }

  saveGcps(marks: GcpMark[]): Promise<MarksSaveResponse> {
    return this.post("/api/v1/gcps", { marks });
  }

  candidates(gcp: string): Promise<CandidatesDoc> {
    return this.json(`/api/v1/gcps/candidates?gcp=${encodeURIComponent(gcp)}`);
  }

  preview(imageId: number): Promise<PreviewDoc> {
    return this.json(`/api/v1/projection/preview?image=${imageId}`);
  }

  export(format: "coco" | "yolo" | "gcp_list"): Promise<ExportResponse> {
    return this.post(`/api/v1/export?format=${format}`);
  }
}
