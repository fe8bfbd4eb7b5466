/**
 * Label queue state machine.
 *
 * The queue holds the server's sample for one question in server order
 * (same seed, same order, so a reload reproduces the session). Scoring
 * is optimistic: a keypress records a pending score and advances; the
 * POST result either confirms it or rejects it, and a rejection returns
 * the cursor to the item with its previous state intact.
 */

import type { LabelRecord, SampleItem, SampleMetrics } from "./api.js";

export interface QueueEntry {
  text: string;
  metrics: SampleMetrics;
  /** Server-confirmed score, either preexisting or reconciled. */
  score: number | null;
  /** Optimistic score awaiting the server. */
  pending: number | null;
}

export const SCORE_MIN = 1;
export const SCORE_MAX = 5;

export class LabelQueue {
  readonly questionId: string;
  readonly annotator: string;
  readonly entries: QueueEntry[];
  private cursor = 0;

  constructor(
    questionId: string,
    annotator: string,
    items: SampleItem[],
    existing: LabelRecord[],
  ) {
    this.questionId = questionId;
    this.annotator = annotator;
    const mine = new Map<string, number>();
    for (const label of existing) {
      if (label.annotator_id === annotator && label.question_id === questionId) {
        mine.set(label.normalized_text, label.score);
      }
    }
    this.entries = items.map((item) => ({
      text: item.normalized_text,
      metrics: item.metrics,
      score: mine.get(item.normalized_text) ?? null,
      pending: null,
    }));
  }

  get position(): number {
    return this.cursor;
  }

  current(): QueueEntry | null {
    return this.entries[this.cursor] ?? null;
  }

  /** Pre-selected value for the score widget: pending wins over stored. */
  selectedScore(): number | null {
    const entry = this.current();
    return entry === null ? null : entry.pending ?? entry.score;
  }

  isDone(): boolean {
    return this.cursor >= this.entries.length;
  }

  progress(): { labeled: number; total: number } {
    const labeled = this.entries.filter(
      (e) => e.score !== null || e.pending !== null,
    ).length;
    return { labeled, total: this.entries.length };
  }

  /** Record an optimistic score on the current item and advance. */
  applyScore(score: number): QueueEntry {
    if (!Number.isInteger(score) || score < SCORE_MIN || score > SCORE_MAX) {
      throw new RangeError(`score must be an integer in [1, 5], got ${score}`);
    }
    const entry = this.current();
    if (entry === null) throw new Error("queue is exhausted");
    entry.pending = score;
    this.cursor += 1;
    return entry;
  }

  skip(): void {
    if (this.cursor < this.entries.length) this.cursor += 1;
  }

  back(): void {
    if (this.cursor > 0) this.cursor -= 1;
  }

  /** Server accepted the label: the pending score becomes the stored one. */
  confirm(text: string, score: number): void {
    const entry = this.entries.find((e) => e.text === text);
    if (entry === undefined) return;
    entry.score = score;
    if (entry.pending === score) entry.pending = null;
  }

  /** Server rejected the label: drop the pending score, return to the item. */
  reject(text: string): void {
    const index = this.entries.findIndex((e) => e.text === text);
    if (index === -1) return;
    const entry = this.entries[index]!;
    entry.pending = null;
    this.cursor = index;
  }
}
