// Typed client for the chromarec HTTP service. Every method maps to one
// endpoint; errors become ServiceError with the server's detail string.

export interface PaletteSwatch {
  slot: string;
  code: string;
  hex: string;
  weight: number;
}

export interface Palettes {
  image: PaletteSwatch[];
  svg: PaletteSwatch[];
  text: PaletteSwatch[];
}

export interface DocumentElement {
  id: string;
  kind: string;
  position: { x: number; y: number };
  size: { w: number; h: number };
  opacity: number;
  colors: string[];
  raster?: string;
}

export interface DocumentJson {
  canvas: { width: number; height: number };
  elements: DocumentElement[];
}

export interface DocumentPayload {
  id: string;
  document: DocumentJson;
  palettes: Palettes;
  preview: string;
}

export interface Candidate {
  code: string;
  hex: string;
  probability: number;
  rank: number;
}

export interface SlotRecommendation {
  slot: string;
  current: string;
  candidates: Candidate[];
}

export interface FavoriteEntry {
  slot: string;
  code: string;
}

export interface ModelStatus {
  status: string;
  model: Record<string, unknown>;
}

export class ServiceError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = "ServiceError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  let body: unknown;
  try {
    body = await res.json();
  } catch {
    body = undefined;
  }
  if (!res.ok) {
    const detail =
      body && typeof body === "object" && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : `HTTP ${res.status}`;
    throw new ServiceError(res.status, detail);
  }
  return body as T;
}

function jsonInit(method: string, body: unknown): RequestInit {
  return {
    method,
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  status(): Promise<ModelStatus> {
    return request(`${this.base}/status`);
  }

  upload(doc: unknown): Promise<DocumentPayload> {
    return request(`${this.base}/documents`, jsonInit("POST", doc));
  }

  fetchDocument(id: string): Promise<DocumentPayload> {
    return request(`${this.base}/documents/${id}`);
  }

  replaceImage(id: string, elementId: string, pngBase64: string): Promise<DocumentPayload> {
    return request(
      `${this.base}/documents/${id}/elements/${elementId}/image`,
      jsonInit("PUT", { png: pngBase64 }),
    );
  }

  recommend(id: string, slots: string[], n: number): Promise<SlotRecommendation[]> {
    const body = { slots, n };
    return request<{ recommendations: SlotRecommendation[] }>(
      `${this.base}/documents/${id}/recommend`,
      jsonInit("POST", body),
    ).then((out) => out.recommendations);
  }

  recolor(id: string, slot: string, code: string): Promise<DocumentPayload> {
    return request(`${this.base}/documents/${id}/recolor`, jsonInit("POST", { slot, code }));
  }

  addFavorite(id: string, slot: string, code: string): Promise<FavoriteEntry[]> {
    return request<{ favorites: FavoriteEntry[] }>(
      `${this.base}/documents/${id}/favorites`,
      jsonInit("POST", { slot, code }),
    ).then((out) => out.favorites);
  }

  favorites(id: string): Promise<FavoriteEntry[]> {
    return request<{ favorites: FavoriteEntry[] }>(
      `${this.base}/documents/${id}/favorites`,
    ).then((out) => out.favorites);
  }
}
