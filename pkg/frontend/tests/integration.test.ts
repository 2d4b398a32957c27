/** End-to-end check against the real Python service.
 *
 * Spawns `salt-dialog serve` on a free port, drives the scripted pork-chop
 * conversation through the typed client, and checks that the belief panel
 * mirrors GET /state after every turn.  Skipped when the Python package is
 * not installed in the environment.
 */
import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { parseBelief } from "../src/belief.js";
import { sendMessage, startConversation } from "../src/state.js";

const PORT = 8765 + Math.floor(Math.random() * 500);
const BASE = `http://127.0.0.1:${PORT}`;

const pythonReady =
  spawnSync("python3", ["-c", "import salt_dialog"], { stdio: "ignore" }).status === 0;

let server: ChildProcess | null = null;

async function waitForHealth(api: ApiClient, attempts = 60): Promise<boolean> {
  for (let i = 0; i < attempts; i += 1) {
    if (await api.health()) return true;
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  return false;
}

describe.skipIf(!pythonReady)("against a live service", () => {
  const api = new ApiClient(BASE);

  beforeAll(async () => {
    server = spawn(
      "python3",
      ["-m", "salt_dialog.cli", "serve", "--port", String(PORT), "--host", "127.0.0.1"],
      { stdio: "ignore" },
    );
    expect(await waitForHealth(api)).toBe(true);
  });

  afterAll(() => {
    server?.kill("SIGTERM");
  });

  it("completes the scripted pork-chop conversation with a mirrored belief panel", async () => {
    let state = await startConversation(api);
    expect(state.status).toBe("active");
    const script = [
      "How much salt in pork?",
      "It weighs 200 grams.",
      "The type is fresh loin top loin chops boneless separable lean and fat.",
      "It is raw.",
    ];
    for (const text of script) {
      state = await sendMessage(api, state, text);
      expect(state.errorBanner).toBeNull();
      // the panel must mirror the server-side snapshot after every turn
      const snapshot = await api.getState(state.sessionId as string);
      expect(state.beliefPanel).toEqual(parseBelief(snapshot.belief));
      const transcriptTexts = snapshot.transcript.map(([, utterance]) => utterance);
      expect(transcriptTexts).toEqual(state.transcript.map((entry) => entry.text));
    }
    expect(state.status).toBe("completed");
    const finalReply = state.transcript.at(-1)?.text ?? "";
    expect(finalReply).toContain("96 mg of salt per 200 grams");
    expect(state.beliefPanel.saltMg).toBe("96");
  });

  it("surfaces a recoverable error banner when the service is unreachable", async () => {
    const deadApi = new ApiClient(`http://127.0.0.1:${PORT + 1}`);
    const state = await startConversation(deadApi);
    expect(state.status).toBe("error");
    expect(state.errorBanner).toContain("retry");
  });
});
