/** Chat view state and its transitions.
 *
 * The transitions are plain functions returning new state objects so they can
 * be tested without a DOM; main.ts only renders whatever state it is handed.
 * Client-side rules: at most one in-flight request, append-only transcript,
 * completed sessions lock the input.
 */

import { Api, ApiError, MessageReply } from "./api.js";
import { BeliefPanel, emptyPanel, parseBelief } from "./belief.js";

export interface TranscriptEntry {
  speaker: "user" | "system";
  text: string;
  timestamp: number;
}

export interface ChatViewState {
  sessionId: string | null;
  transcript: TranscriptEntry[];
  pending: boolean;
  beliefPanel: BeliefPanel;
  errorBanner: string | null;
  status: "idle" | "active" | "completed" | "error";
}

export function initialState(): ChatViewState {
  return {
    sessionId: null,
    transcript: [],
    pending: false,
    beliefPanel: emptyPanel(),
    errorBanner: null,
    status: "idle",
  };
}

export async function startConversation(api: Api): Promise<ChatViewState> {
  try {
    const session = await api.createSession();
    return { ...initialState(), sessionId: session.id, status: "active" };
  } catch (error) {
    return {
      ...initialState(),
      status: "error",
      errorBanner: bannerText(error),
    };
  }
}

/** Append the user's bubble and mark the request in flight; null when not allowed. */
export function beginSend(state: ChatViewState, text: string, timestamp: number): ChatViewState | null {
  if (state.pending || state.status !== "active" || !state.sessionId || !text.trim()) {
    return null;
  }
  return {
    ...state,
    pending: true,
    errorBanner: null,
    transcript: [...state.transcript, { speaker: "user", text, timestamp }],
  };
}

export function applyReply(state: ChatViewState, reply: MessageReply, timestamp: number): ChatViewState {
  return {
    ...state,
    pending: false,
    status: reply.status === "completed" ? "completed" : "active",
    beliefPanel: parseBelief(reply.belief),
    transcript: [...state.transcript, { speaker: "system", text: reply.reply, timestamp }],
  };
}

export function applyFailure(state: ChatViewState, error: unknown): ChatViewState {
  return { ...state, pending: false, errorBanner: bannerText(error) };
}

export function clearError(state: ChatViewState): ChatViewState {
  return { ...state, errorBanner: null };
}

/** Full round trip: optimistic bubble, POST, then reply or a recoverable banner. */
export async function sendMessage(
  api: Api,
  state: ChatViewState,
  text: string,
  now: () => number = Date.now,
): Promise<ChatViewState> {
  const inFlight = beginSend(state, text, now());
  if (inFlight === null) {
    return state;
  }
  try {
    const reply = await api.sendMessage(inFlight.sessionId as string, text);
    return applyReply(inFlight, reply, now());
  } catch (error) {
    return applyFailure(inFlight, error);
  }
}

function bannerText(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.message} (check that the service is running, then retry)`;
  }
  return `unexpected error: ${String(error)} (retry when ready)`;
}
