// Thin client for the annotation service, plus local draft persistence so
// an unsaved draft survives a page reload or a dead server.

import type { AnnotationDoc } from "./schema.js";

export interface VideoInfo {
  id: string;
  frame_count: number;
  width: number;
  height: number;
}

export interface ServiceConfig {
  px_per_micron: number;
  contrast_cutoff: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly jsonPath?: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async listVideos(): Promise<VideoInfo[]> {
    const resp = await fetch(this.url("/api/videos"));
    if (!resp.ok) {
      throw new ApiError(resp.status, `listing videos failed (${resp.status})`);
    }
    return (await resp.json()) as VideoInfo[];
  }

  async getConfig(): Promise<ServiceConfig> {
    const resp = await fetch(this.url("/api/config"));
    if (!resp.ok) {
      throw new ApiError(resp.status, `config fetch failed (${resp.status})`);
    }
    return (await resp.json()) as ServiceConfig;
  }

  frameUrl(videoId: string, frame: number): string {
    return this.url(`/api/videos/${videoId}/frames/${frame}`);
  }

  /** Returns null when no annotation exists yet. */
  async getAnnotation(videoId: string): Promise<AnnotationDoc | null> {
    const resp = await fetch(this.url(`/api/annotations/${videoId}`));
    if (resp.status === 404) {
      return null;
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, `annotation fetch failed (${resp.status})`);
    }
    return (await resp.json()) as AnnotationDoc;
  }

  /** Raw-text variant used to check byte-exact round trips. */
  async getAnnotationText(videoId: string): Promise<string | null> {
    const resp = await fetch(this.url(`/api/annotations/${videoId}`));
    if (resp.status === 404) {
      return null;
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, `annotation fetch failed (${resp.status})`);
    }
    return await resp.text();
  }

  async saveAnnotation(videoId: string, body: string): Promise<void> {
    const resp = await fetch(this.url(`/api/annotations/${videoId}`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    if (resp.status === 201) {
      return;
    }
    let message = `save failed (${resp.status})`;
    let jsonPath: string | undefined;
    try {
      const detail = (await resp.json()) as { error?: string; path?: string };
      if (detail.error) {
        message = detail.error;
      }
      jsonPath = detail.path;
    } catch {
      // non-JSON error body; keep the generic message
    }
    throw new ApiError(resp.status, message, jsonPath);
  }
}

/** Minimal slice of the Storage interface (injectable for tests). */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const DRAFT_PREFIX = "annotate-ui.draft.";

export function saveLocalDraft(store: KeyValueStore, videoId: string, body: string): void {
  store.setItem(DRAFT_PREFIX + videoId, body);
}

export function loadLocalDraft(store: KeyValueStore, videoId: string): string | null {
  return store.getItem(DRAFT_PREFIX + videoId);
}

export function clearLocalDraft(store: KeyValueStore, videoId: string): void {
  store.removeItem(DRAFT_PREFIX + videoId);
}
