// Typed client for the labrag /v1 session API.

export type FactorQuestion = {
  factor: string;
  choices: string[];
  allows_free_text: boolean;
};

export type AnswerCard = {
  text: string;
  source_url: string;
  factors_applied: Record<string, string>;
  disclaimer: string;
};

export type SessionView = {
  session_id?: string;
  stage: "AwaitingQuery" | "AwaitingFactors" | "Answered" | "Failed";
  questions?: FactorQuestion[];
  answer?: AnswerCard;
  failure_reason?: string;
};

export type ApiError = {
  code: string;
  message: string;
  details: Record<string, unknown>;
};

export class LabragApiError extends Error {
  constructor(public status: number, public body: ApiError) {
    super(`${body.code}: ${body.message}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json();
  if (!resp.ok) {
    throw new LabragApiError(resp.status, body as ApiError);
  }
  return body as T;
}

export class LabragClient {
  constructor(private baseUrl: string = "") {}

  health(): Promise<{ status: string; index_size: number; provider_kind: string }> {
    return request(`${this.baseUrl}/v1/health`);
  }

  createSession(question: string): Promise<SessionView> {
    return request(`${this.baseUrl}/v1/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
  }

  submitAnswers(sessionId: string, answers: Record<string, string>): Promise<SessionView> {
    return request(`${this.baseUrl}/v1/sessions/${encodeURIComponent(sessionId)}/answers`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answers }),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return request(`${this.baseUrl}/v1/sessions/${encodeURIComponent(sessionId)}`);
  }
}
