/** Typed client for the tutoring service. The server is authoritative:
 * every verdict rendered by the UI comes verbatim from these responses. */

export interface ProblemSummary {
  id: string;
  level: number;
  premises: string[];
  premises_display: string[];
  conclusion: string;
  conclusion_display: string;
}

export interface StatementView {
  index: number;
  text: string;
  display: string;
  origin: "premise" | "derived";
  rule: string | null;
  parents: number[] | null;
}

export interface HistoryView {
  step: string;
  rule: string;
  category: string;
  justified: boolean;
  accepted: boolean;
  feedback: string;
}

export interface BoardView {
  session_id: string;
  problem_id: string;
  level: number;
  statements: StatementView[];
  conclusion: string;
  conclusion_display: string;
  completed: boolean;
  distance: number | null;
  history: HistoryView[];
}

export interface Classification {
  category: string;
  justified: boolean;
  distance_before: number | null;
  distance_after: number | null;
}

export interface StepResult {
  classification: Classification;
  accepted: boolean;
  feedback: string;
  board: BoardView;
}

export interface HintView {
  tier: string;
  statement: string;
  statement_display: string;
  rule?: string;
  parents?: string[];
  scaffold?: string;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  };
}

export class TutorApi {
  constructor(private base: string = "") {}

  listProblems(): Promise<ProblemSummary[]> {
    return request(`${this.base}/problems`);
  }

  createSession(problemId: string): Promise<BoardView> {
    return request(`${this.base}/sessions`, post({ problem_id: problemId }));
  }

  getBoard(sessionId: string): Promise<BoardView> {
    return request(`${this.base}/sessions/${sessionId}`);
  }

  submitStep(sessionId: string, step: string, rule: string, parentIndices: number[]): Promise<StepResult> {
    return request(
      `${this.base}/sessions/${sessionId}/step`,
      post({ step, rule, parent_indices: parentIndices }),
    );
  }

  requestHint(sessionId: string, tier: "tutor" | "teacher"): Promise<HintView> {
    return request(`${this.base}/sessions/${sessionId}/hint?tier=${tier}`, { method: "POST" });
  }

  deriveCandidates(sessionId: string, rule: string, parentIndices: number[]): Promise<{ rule: string; candidates: string[]; candidates_display: string[] }> {
    return request(
      `${this.base}/sessions/${sessionId}/candidates`,
      post({ rule, parent_indices: parentIndices }),
    );
  }
}
