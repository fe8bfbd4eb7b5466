import { describe, expect, it } from "vitest";

import type { LabelRecord, SampleItem } from "../src/api.js";
import { LabelQueue } from "../src/queue.js";

function item(text: string): SampleItem {
  return {
    normalized_text: text,
    metrics: {
      centroid_distance: 0.5,
      frequency: 1,
      edit_distance_to_mode: 3,
      char_length: text.length,
    },
  };
}

function label(
  annotator: string,
  question: string,
  text: string,
  score: number,
): LabelRecord {
  return {
    annotator_id: annotator,
    question_id: question,
    normalized_text: text,
    score,
    labeled_at: "2026-02-12T09:00:00+00:00",
  };
}

const ITEMS = [item("alpha"), item("beta"), item("gamma")];

describe("construction", () => {
  it("preserves the server's sample order", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    expect(queue.entries.map((e) => e.text)).toEqual(["alpha", "beta", "gamma"]);
    expect(queue.position).toBe(0);
  });

  it("preloads only this annotator's labels for this question", () => {
    const existing = [
      label("a1", "q01", "beta", 4),
      label("a2", "q01", "alpha", 1), // someone else's
      label("a1", "q99", "gamma", 2), // another question
    ];
    const queue = new LabelQueue("q01", "a1", ITEMS, existing);
    expect(queue.entries.map((e) => e.score)).toEqual([null, 4, null]);
  });

  it("pre-selects the prior score when revisiting", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, [label("a1", "q01", "alpha", 5)]);
    expect(queue.selectedScore()).toBe(5);
  });
});

describe("scoring flow", () => {
  it("applyScore records a pending score and advances", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    const entry = queue.applyScore(3);
    expect(entry.text).toBe("alpha");
    expect(entry.pending).toBe(3);
    expect(entry.score).toBeNull();
    expect(queue.position).toBe(1);
  });

  it("progress counts stored and pending labels", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, [label("a1", "q01", "gamma", 2)]);
    expect(queue.progress()).toEqual({ labeled: 1, total: 3 });
    queue.applyScore(4);
    expect(queue.progress()).toEqual({ labeled: 2, total: 3 });
  });

  it("confirm promotes pending to stored", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    queue.applyScore(4);
    queue.confirm("alpha", 4);
    expect(queue.entries[0]).toMatchObject({ score: 4, pending: null });
  });

  it("reject drops the pending score and returns the cursor", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    queue.applyScore(2);
    queue.skip();
    expect(queue.position).toBe(2);
    queue.reject("alpha");
    expect(queue.position).toBe(0);
    expect(queue.entries[0]).toMatchObject({ score: null, pending: null });
  });

  it("relabeling keeps the old stored score until the server confirms", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, [label("a1", "q01", "alpha", 1)]);
    queue.applyScore(5);
    expect(queue.entries[0]).toMatchObject({ score: 1, pending: 5 });
    queue.reject("alpha");
    expect(queue.entries[0]).toMatchObject({ score: 1, pending: null });
    expect(queue.selectedScore()).toBe(1);
  });

  it("rejects scores outside the rubric", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    expect(() => queue.applyScore(0)).toThrow(RangeError);
    expect(() => queue.applyScore(6)).toThrow(RangeError);
    expect(() => queue.applyScore(2.5)).toThrow(RangeError);
  });
});

describe("navigation", () => {
  it("skip and back stay in bounds", () => {
    const queue = new LabelQueue("q01", "a1", ITEMS, []);
    queue.back();
    expect(queue.position).toBe(0);
    queue.skip();
    queue.skip();
    queue.skip();
    expect(queue.position).toBe(3);
    expect(queue.isDone()).toBe(true);
    queue.skip();
    expect(queue.position).toBe(3);
    queue.back();
    expect(queue.position).toBe(2);
  });

  it("scoring the last item finishes the queue", () => {
    const queue = new LabelQueue("q01", "a1", [item("only")], []);
    queue.applyScore(3);
    expect(queue.isDone()).toBe(true);
    expect(queue.current()).toBeNull();
    expect(() => queue.applyScore(3)).toThrow("exhausted");
  });
});
