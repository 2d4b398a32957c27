// Default API base; `npm run build` regenerates this file from the
// SALT_DIALOG_API environment variable (scripts/gen-config.mjs).
export const API_BASE = "http://127.0.0.1:8000";
