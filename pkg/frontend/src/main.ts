/** DOM wiring: renders ChatViewState and forwards user events to state.ts. */

import { ApiClient } from "./api.js";
import { API_BASE } from "./config.js";
import { BeliefPanel } from "./belief.js";
import {
  ChatViewState,
  applyFailure,
  applyReply,
  beginSend,
  clearError,
  initialState,
  startConversation,
} from "./state.js";

const api = new ApiClient(API_BASE);
let state: ChatViewState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const log = () => el<HTMLUListElement>("chat-log");
const input = () => el<HTMLInputElement>("message-input");
const sendButton = () => el<HTMLButtonElement>("send-button");
const banner = () => el<HTMLDivElement>("error-banner");
const bannerText = () => el<HTMLSpanElement>("error-text");
const beliefChips = () => el<HTMLDivElement>("belief-chips");
const sessionLabel = () => el<HTMLSpanElement>("session-label");
const newButton = () => el<HTMLButtonElement>("new-conversation");

function renderTranscript(): void {
  const list = log();
  list.innerHTML = "";
  for (const entry of state.transcript) {
    const item = document.createElement("li");
    item.className = `bubble ${entry.speaker}`;
    const who = document.createElement("span");
    who.className = "speaker";
    who.textContent = entry.speaker === "user" ? "You" : "System";
    const text = document.createElement("span");
    text.textContent = entry.text;
    item.append(who, text);
    list.appendChild(item);
  }
  if (state.pending) {
    const item = document.createElement("li");
    item.className = "bubble system pending";
    item.textContent = "…";
    list.appendChild(item);
  }
  list.scrollTop = list.scrollHeight;
}

function renderBelief(panel: BeliefPanel): void {
  const host = beliefChips();
  host.innerHTML = "";
  if (panel.malformed) {
    const fallback = document.createElement("code");
    fallback.textContent = panel.raw;
    host.appendChild(fallback);
    return;
  }
  const addChip = (label: string, value: string) => {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = `${label}: ${value}`;
    host.appendChild(chip);
  };
  for (const chip of panel.chips) addChip(chip.label, chip.value);
  if (panel.saltMg !== null) addChip("salt", `${panel.saltMg} mg`);
  for (const chip of panel.other) addChip(`other (${chip.label})`, chip.value);
  if (!host.childElementCount) {
    const empty = document.createElement("span");
    empty.className = "chip empty";
    empty.textContent = "nothing yet";
    host.appendChild(empty);
  }
}

function render(): void {
  renderTranscript();
  renderBelief(state.beliefPanel);
  sessionLabel().textContent = state.sessionId ? `session ${state.sessionId.slice(0, 8)}` : "no session";
  const locked = state.pending || state.status !== "active";
  input().disabled = locked;
  sendButton().disabled = locked || !input().value.trim();
  newButton().hidden = state.status !== "completed" && state.status !== "error";
  banner().hidden = state.errorBanner === null;
  if (state.errorBanner !== null) bannerText().textContent = state.errorBanner;
  if (!locked) input().focus();
}

function setState(next: ChatViewState): void {
  state = next;
  render();
}

async function start(): Promise<void> {
  setState(await startConversation(api));
}

async function submit(): Promise<void> {
  const text = input().value;
  const inFlight = beginSend(state, text, Date.now());
  if (inFlight === null) return;
  input().value = "";
  setState(inFlight); // optimistic user bubble while the request runs
  try {
    const reply = await api.sendMessage(inFlight.sessionId as string, text);
    setState(applyReply(inFlight, reply, Date.now()));
  } catch (error) {
    setState(applyFailure(inFlight, error));
  }
}

export function wire(): void {
  sendButton().addEventListener("click", () => void submit());
  input().addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !sendButton().disabled) void submit();
  });
  input().addEventListener("input", () => {
    sendButton().disabled =
      state.pending || state.status !== "active" || !input().value.trim();
  });
  el<HTMLButtonElement>("retry-button").addEventListener("click", () => {
    if (state.status === "error" || state.sessionId === null) {
      void start();
    } else {
      setState(clearError(state));
    }
  });
  newButton().addEventListener("click", () => void start());
  void start();
}

if (typeof document !== "undefined" && document.getElementById("chat-log")) {
  wire();
}
