/** Typed client for the study service JSON API. */

export interface NextItemResponse {
  done: boolean;
  item_id?: string;
  image_pgm_b64?: string;
  answered: number;
  total: number;
}

export interface SubmitResult {
  ok: boolean;
  conflict: boolean;
  answered?: number;
  total?: number;
}

export interface ConfusionCell {
  n_items: number;
  answered: number;
  classified_real: number;
  classified_fake: number;
  percent_real: number;
  percent_fake: number;
  [key: string]: number;
}

export interface ReaderTable {
  reader_id: string;
  partial: boolean;
  groups: Record<string, ConfusionCell>;
  outcomes: Record<string, Record<string, number>>;
}

export interface StudyReport {
  session_id: string;
  n_items: number;
  readers: string[];
  progress: Record<string, number>;
  complete: Record<string, boolean>;
  confusion_tables: Record<string, ReaderTable>;
  kappa: Record<string, number>;
  unblinded: boolean;
  items: { item_id: string; responses: Record<string, string>; source_group?: string }[];
}

export type Label = "real" | "fake";

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request(path: string, body?: unknown): Promise<unknown> {
    const response = await fetch(this.baseUrl + path, {
      method: body === undefined ? "GET" : "POST",
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const message =
        (payload as { error?: { message?: string } }).error?.message ??
        `request failed with status ${response.status}`;
      throw new ApiError(message, response.status);
    }
    return payload;
  }

  async nextItem(sessionId: string, readerId: string): Promise<NextItemResponse> {
    const path = `/sessions/${sessionId}/next?reader=${encodeURIComponent(readerId)}`;
    return (await this.request(path)) as NextItemResponse;
  }

  async submit(
    sessionId: string,
    readerId: string,
    itemId: string,
    label: Label,
  ): Promise<SubmitResult> {
    try {
      const payload = (await this.request(`/sessions/${sessionId}/responses`, {
        reader_id: readerId,
        item_id: itemId,
        label,
      })) as { answered: number; total: number };
      return { ...payload, ok: true, conflict: false };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        return { ok: false, conflict: true };
      }
      throw err;
    }
  }

  async report(sessionId: string, unblind: boolean): Promise<StudyReport> {
    const path = `/sessions/${sessionId}/report?unblind=${unblind}`;
    return (await this.request(path)) as StudyReport;
  }
}
