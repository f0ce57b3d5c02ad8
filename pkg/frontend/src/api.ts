// Typed client for the survey service HTTP API.

export interface BankInfo {
  bank_id: string;
  kind: "validation" | "naming";
  mode: string;
  prompt: string;
  total_questions: number;
  has_screening: boolean;
}

export interface SessionInfo {
  session_id: string;
  bank_id: string;
  kind: "validation" | "naming";
  mode: string;
  prompt: string;
  assigned_count: number;
}

export interface ValidationQuestionPayload {
  kind: "validation";
  question_id: string;
  post_id: string;
  title: string;
  body: string;
  options: string[];
  mode: string;
}

export interface NamingQuestionPayload {
  kind: "naming";
  question_id: string;
  cluster_id: number;
  keywords: string[];
  example_posts: { post_id: string; title: string; body_preview: string; selection: string }[];
  flagged: boolean;
}

export type QuestionPayload = ValidationQuestionPayload | NamingQuestionPayload;

export interface NextPayload {
  status: "screening" | "question" | "done" | "screening_failed";
  answered: number;
  total: number;
  prompt?: string;
  question?: QuestionPayload;
}

export interface SubmitAck {
  status: string;
  duplicate: boolean;
  stored?: boolean;
  screening_passed?: boolean;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function asJson(response: Response): Promise<any> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json();
}

export class SurveyApi {
  constructor(private readonly base: string = "") {}

  banks(): Promise<BankInfo[]> {
    return fetch(`${this.base}/api/banks`).then(asJson);
  }

  createSession(participantId: string, bankId: string): Promise<SessionInfo> {
    return fetch(`${this.base}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ participant_id: participantId, bank_id: bankId }),
    }).then(asJson);
  }

  nextQuestion(sessionId: string): Promise<NextPayload> {
    return fetch(`${this.base}/api/sessions/${sessionId}/next`).then(asJson);
  }

  // The server deduplicates by (session, question), so retrying a submission
  // after a network failure is safe.
  async submitAnswer(
    sessionId: string,
    questionId: string,
    selections: string[],
    retries = 2,
  ): Promise<SubmitAck> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= retries; attempt++) {
      try {
        const response = await fetch(`${this.base}/api/sessions/${sessionId}/answers`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ question_id: questionId, selections }),
        });
        return await asJson(response);
      } catch (err) {
        if (err instanceof ApiError) throw err; // the server answered; don't retry
        lastError = err;
      }
    }
    throw lastError instanceof Error ? lastError : new Error("network failure");
  }
}
