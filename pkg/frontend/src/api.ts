/** Typed client for the salt-dialog session API. */

export interface SessionCreated {
  id: string;
}

export interface MessageReply {
  reply: string;
  belief: string;
  status: string;
}

export interface SessionState {
  belief: string;
  asked: string[];
  status: string;
  transcript: [string, string][];
}

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

export interface Api {
  createSession(): Promise<SessionCreated>;
  sendMessage(sessionId: string, text: string): Promise<MessageReply>;
  getState(sessionId: string): Promise<SessionState>;
  health(): Promise<boolean>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient implements Api {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new ApiError(`cannot reach the service: ${String(error)}`);
    }
    if (!response.ok) {
      let detail = "";
      try {
        const body = (await response.json()) as { error?: string };
        detail = body.error ?? "";
      } catch {
        // non-JSON error body; the status code is enough
      }
      throw new ApiError(detail || `request failed with status ${response.status}`, response.status);
    }
    return (await response.json()) as T;
  }

  createSession(): Promise<SessionCreated> {
    return this.request<SessionCreated>("/session", { method: "POST" });
  }

  sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    return this.request<MessageReply>(`/session/${sessionId}/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/session/${sessionId}/state`);
  }

  async health(): Promise<boolean> {
    try {
      const body = await this.request<{ status: string }>("/health");
      return body.status === "ok";
    } catch {
      return false;
    }
  }
}
