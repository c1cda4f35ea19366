// Pure session-state helpers, kept free of DOM access so they are easy to
// test. The app owns one SessionState and re-renders after every change.

import type { DocumentPayload, FavoriteEntry, Palettes, SlotRecommendation } from "./api.js";

export const GROUP_ORDER = ["image", "svg", "text"] as const;
export type GroupName = (typeof GROUP_ORDER)[number];

export interface UndoRecord {
  slot: string;
  code: string;
}

export interface SessionState {
  view: DocumentPayload | null;
  selected: Set<string>;
  recommendations: SlotRecommendation[];
  favorites: FavoriteEntry[];
  undo: UndoRecord[];
  busy: boolean;
  message: string;
}

export function emptyState(): SessionState {
  return {
    view: null,
    selected: new Set(),
    recommendations: [],
    favorites: [],
    undo: [],
    busy: false,
    message: "upload a document to begin",
  };
}

export function groupOf(slot: string): GroupName {
  const group = slot.split(":", 1)[0];
  if (!(GROUP_ORDER as readonly string[]).includes(group)) {
    throw new Error(`unknown palette group in ${slot}`);
  }
  return group as GroupName;
}

export function toggleSlot(selected: ReadonlySet<string>, slot: string): Set<string> {
  const next = new Set(selected);
  if (next.has(slot)) {
    next.delete(slot);
  } else {
    next.add(slot);
  }
  return next;
}

/** Stable order for candidate strips: group order, then slot index. */
export function orderSlots(slots: Iterable<string>): string[] {
  return [...slots].sort((a, b) => {
    const ga = GROUP_ORDER.indexOf(groupOf(a));
    const gb = GROUP_ORDER.indexOf(groupOf(b));
    if (ga !== gb) {
      return ga - gb;
    }
    return Number(a.split(":")[1]) - Number(b.split(":")[1]);
  });
}

/** Current code of a slot, straight from the palette payload. */
export function slotCode(palettes: Palettes, slot: string): string | undefined {
  const group = groupOf(slot);
  return palettes[group].find((s) => s.slot === slot)?.code;
}

export const UNDO_LIMIT = 50;

export function pushUndo(stack: readonly UndoRecord[], record: UndoRecord): UndoRecord[] {
  const next = [...stack, record];
  return next.length > UNDO_LIMIT ? next.slice(next.length - UNDO_LIMIT) : next;
}

export function formatProbability(p: number): string {
  if (p >= 0.001) {
    return `${(p * 100).toFixed(1)}%`;
  }
  return "<0.1%";
}

/** Selected slots that vanished (palette shrank after an edit) are dropped. */
export function pruneSelection(selected: ReadonlySet<string>, palettes: Palettes): Set<string> {
  const alive = new Set<string>();
  for (const group of GROUP_ORDER) {
    for (const swatch of palettes[group]) {
      alive.add(swatch.slot);
    }
  }
  return new Set([...selected].filter((slot) => alive.has(slot)));
}
