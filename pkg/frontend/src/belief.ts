/** Parser for the service's belief-state grammar: "[food=pork; cook=broiled; value=48]".
 *
 * The UI never computes or alters salt values; this only relabels what the
 * service sent so it can be shown as chips.
 */

export interface BeliefChip {
  label: string;
  value: string;
}

export interface BeliefPanel {
  chips: BeliefChip[];
  other: BeliefChip[];
  saltMg: string | null;
  malformed: boolean;
  raw: string;
}

const KNOWN_SLOTS = ["food", "cook", "type", "animal", "part", "foodweight", "metric"];

const SLOT_LABELS: Record<string, string> = {
  food: "food",
  cook: "cook",
  type: "type",
  animal: "animal",
  part: "part",
  foodweight: "weight",
  metric: "unit",
};

export function emptyPanel(): BeliefPanel {
  return { chips: [], other: [], saltMg: null, malformed: false, raw: "[]" };
}

export function parseBelief(text: string): BeliefPanel {
  const raw = text;
  const trimmed = text.trim();
  if (!trimmed.startsWith("[") || !trimmed.endsWith("]")) {
    return { chips: [], other: [], saltMg: null, malformed: true, raw };
  }
  const inner = trimmed.slice(1, -1).trim();
  const panel: BeliefPanel = { chips: [], other: [], saltMg: null, malformed: false, raw };
  if (!inner) {
    return panel;
  }
  for (const item of inner.split(";")) {
    const entry = item.trim();
    if (!entry) continue;
    const eq = entry.indexOf("=");
    if (eq < 0) {
      panel.other.push({ label: entry, value: "" });
      continue;
    }
    const name = entry.slice(0, eq).trim().toLowerCase();
    const value = entry.slice(eq + 1).trim();
    if (name === "value") {
      panel.saltMg = value;
    } else if (KNOWN_SLOTS.includes(name)) {
      panel.chips.push({ label: SLOT_LABELS[name], value: value.replace(/_/g, " ") });
    } else {
      panel.other.push({ label: name, value });
    }
  }
  return panel;
}
