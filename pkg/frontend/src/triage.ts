/**
 * Triage view logic: which classified responses to surface and in what
 * order. Pure functions over API payloads; nothing is reclassified here.
 */

import type { AtRiskEntry, RunClasses, RunSummary } from "./api.js";
import type { NeighborEvidence } from "./api.js";

export interface FlaggedRow {
  text: string;
  cls: string;
  margin: number;
  neighbors: NeighborEvidence[];
}

export type SortKey = "margin" | "text";

/** Responses the run classified as non-earnest, one row each. */
export function flaggedRows(payload: RunClasses): FlaggedRow[] {
  const rows: FlaggedRow[] = [];
  for (const [text, record] of Object.entries(payload.classes)) {
    if (record.class === "non_earnest") {
      rows.push({
        text,
        cls: record.class,
        margin: record.margin,
        neighbors: record.neighbors,
      });
    }
  }
  return sortRows(rows, "margin", true);
}

/** Stable sort; margin ties fall back to text so the order is total. */
export function sortRows(
  rows: FlaggedRow[],
  key: SortKey,
  ascending: boolean,
): FlaggedRow[] {
  const sign = ascending ? 1 : -1;
  return [...rows].sort((a, b) => {
    const primary =
      key === "margin" ? a.margin - b.margin : a.text.localeCompare(b.text);
    if (primary !== 0) return sign * primary;
    return a.text.localeCompare(b.text);
  });
}

/** One line per run for the run picker, newest last (server order). */
export function describeRun(run: RunSummary): string {
  return `${run.run_id}  ${run.question_id}  ${run.created_at}`;
}

export interface AtRiskRow {
  studentId: string;
  fraction: number;
  responses: number;
  nonEarnest: number;
}

/** Straight projection of the server payload; no recomputation. */
export function atRiskRows(entries: AtRiskEntry[]): AtRiskRow[] {
  return entries.map((e) => ({
    studentId: e.student_id,
    fraction: e.window_fraction,
    responses: e.evidence.responses,
    nonEarnest: e.evidence.non_earnest,
  }));
}
