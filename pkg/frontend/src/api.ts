/** Typed HTTP client for the verification service. */

import type {
  CandidateEntry,
  ClaimFragments,
  Feedback,
  RunPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    detail = body.detail ?? body.error ?? detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(response.status, detail);
}

export interface DatasetUpload {
  tables: { name: string; content: Blob | string }[];
  schema?: Blob | string;
  dictionary?: Blob | string;
  synonyms?: Blob | string;
  wordlist?: Blob | string;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ ok: boolean }> {
    return this.request("/health");
  }

  async uploadDataset(upload: DatasetUpload): Promise<string> {
    const form = new FormData();
    for (const table of upload.tables) {
      form.append("files", new Blob([table.content]), table.name);
    }
    const extras: [string, Blob | string | undefined, string][] = [
      ["schema", upload.schema, "schema.json"],
      ["dictionary", upload.dictionary, "dictionary.tsv"],
      ["synonyms", upload.synonyms, "synonyms.tsv"],
      ["wordlist", upload.wordlist, "wordlist.txt"],
    ];
    for (const [field, content, filename] of extras) {
      if (content !== undefined) {
        form.append(field, new Blob([content]), filename);
      }
    }
    const body = await this.request<{ dataset_id: string }>("/datasets", {
      method: "POST",
      body: form,
    });
    return body.dataset_id;
  }

  async uploadDocument(content: Blob | string, parses?: Blob | string): Promise<string> {
    const form = new FormData();
    form.append("document", new Blob([content]), "document.txt");
    if (parses !== undefined) {
      form.append("parses", new Blob([parses]), "parses.json");
    }
    const body = await this.request<{ document_id: string }>("/documents", {
      method: "POST",
      body: form,
    });
    return body.document_id;
  }

  async createRun(datasetId: string, documentId: string,
                  config?: Record<string, unknown>): Promise<string> {
    const body = await this.request<{ run_id: string }>("/runs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        dataset_id: datasetId,
        document_id: documentId,
        ...(config ? { config } : {}),
      }),
    });
    return body.run_id;
  }

  getRun(runId: string): Promise<RunPayload> {
    return this.request(`/runs/${runId}`);
  }

  async getDocumentView(runId: string): Promise<string> {
    const body = await this.request<{ html: string }>(`/runs/${runId}/document`);
    return body.html;
  }

  async getCandidates(runId: string, claimId: number, k = 5): Promise<CandidateEntry[]> {
    const body = await this.request<{ candidates: CandidateEntry[] }>(
      `/runs/${runId}/claims/${claimId}/candidates?k=${k}`,
    );
    return body.candidates;
  }

  getFragments(runId: string, claimId: number): Promise<ClaimFragments> {
    return this.request(`/runs/${runId}/claims/${claimId}/fragments`);
  }

  async sendFeedback(runId: string, claimId: number, feedback: Feedback): Promise<string> {
    const body = await this.request<{ run_id: string }>(
      `/runs/${runId}/claims/${claimId}/feedback`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(feedback),
      },
    );
    return body.run_id;
  }
}
