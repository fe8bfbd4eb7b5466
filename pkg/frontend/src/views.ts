/**
 * DOM panels. Each render function draws into a root element, wires its
 * handlers, and returns a cleanup function when it installs listeners
 * outside the root (the label panel's keyboard shortcuts).
 *
 * Panels render server payloads as-is; the only client-side state is
 * cursor position, sort order, and which row is expanded.
 */

import { ApiError } from "./api.js";
import type {
  AtRiskEntry,
  LabelRecord,
  ProjectedPoint,
  QuestionSummary,
  RunClasses,
  RunSummary,
} from "./api.js";
import { LabelQueue, SCORE_MAX, SCORE_MIN } from "./queue.js";
import { buildScatterSvg } from "./scatter.js";
import { atRiskRows, flaggedRows, sortRows } from "./triage.js";
import type { FlaggedRow, SortKey } from "./triage.js";

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function clear(root: HTMLElement): void {
  root.replaceChildren();
}

export type Cleanup = () => void;

// ---------------------------------------------------------------- label

export interface LabelPanelHooks {
  submitLabel(text: string, score: number): Promise<LabelRecord>;
  onAuthError(): void;
}

export function renderLabelPanel(
  root: HTMLElement,
  queue: LabelQueue,
  hooks: LabelPanelHooks,
): Cleanup {
  let errorMessage: string | null = null;

  function score(value: number): void {
    if (queue.isDone()) return;
    errorMessage = null;
    const entry = queue.applyScore(value);
    draw();
    hooks
      .submitLabel(entry.text, value)
      .then((record) => {
        queue.confirm(record.normalized_text, record.score);
        draw();
      })
      .catch((err: unknown) => {
        queue.reject(entry.text);
        if (err instanceof ApiError && err.status === 401) {
          hooks.onAuthError();
          return;
        }
        errorMessage = err instanceof Error ? err.message : String(err);
        draw();
      });
  }

  function draw(): void {
    clear(root);
    const { labeled, total } = queue.progress();
    const progress = el(
      "div",
      { class: "progress", "data-testid": "progress" },
      `labeled ${labeled} / ${total}`,
    );

    if (queue.isDone()) {
      root.append(
        el("h2", {}, "queue finished"),
        progress,
        el("p", {}, "every sampled response has been visited."),
        makeNav(),
      );
      return;
    }

    const entry = queue.current()!;
    const metrics = entry.metrics;
    const selected = queue.selectedScore();
    const buttons = el("div", { class: "scores", role: "group" });
    for (let value = SCORE_MIN; value <= SCORE_MAX; value += 1) {
      const button = el(
        "button",
        {
          class: value === selected ? "score-btn selected" : "score-btn",
          "data-score": String(value),
          "aria-pressed": value === selected ? "true" : "false",
        },
        String(value),
      );
      button.addEventListener("click", () => score(value));
      buttons.append(button);
    }

    const card = el(
      "div",
      { class: "card", "data-testid": "item-card" },
      el("p", { class: "response-text" }, entry.text),
      el(
        "p",
        { class: "metrics" },
        `centroid ${metrics.centroid_distance.toFixed(3)} | ` +
          `freq ${metrics.frequency} | ` +
          `edit-to-mode ${metrics.edit_distance_to_mode} | ` +
          `len ${metrics.char_length}`,
      ),
      buttons,
    );

    root.append(
      el("h2", {}, `label ${queue.questionId}`),
      progress,
      card,
      makeNav(),
    );
    if (errorMessage !== null) {
      root.append(el("p", { class: "error", role: "alert" }, errorMessage));
    }
  }

  function makeNav(): HTMLElement {
    const back = el("button", { class: "nav-back" }, "back");
    back.addEventListener("click", () => {
      errorMessage = null;
      queue.back();
      draw();
    });
    const skip = el("button", { class: "nav-skip" }, "skip");
    skip.addEventListener("click", () => {
      errorMessage = null;
      queue.skip();
      draw();
    });
    return el("div", { class: "nav" }, back, skip);
  }

  function onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    if (event.key >= "1" && event.key <= "5") {
      score(Number(event.key));
    } else if (event.key === "ArrowLeft") {
      queue.back();
      draw();
    } else if (event.key === "ArrowRight") {
      queue.skip();
      draw();
    }
  }

  document.addEventListener("keydown", onKey);
  draw();
  return () => document.removeEventListener("keydown", onKey);
}

// --------------------------------------------------------------- triage

export interface TriagePanelHooks {
  loadClasses(runId: string): Promise<RunClasses>;
  submitCorrection(
    question: string,
    text: string,
    score: number,
  ): Promise<LabelRecord>;
  project(question: string): Promise<ProjectedPoint[]>;
  onAuthError(): void;
}

export function renderTriagePanel(
  root: HTMLElement,
  runs: RunSummary[],
  hooks: TriagePanelHooks,
): Cleanup {
  let selectedRun: RunSummary | null = null;
  let rows: FlaggedRow[] = [];
  let sortKey: SortKey = "margin";
  let ascending = true;
  let expandedText: string | null = null;
  let message: string | null =
    runs.length === 0
      ? "no classification runs yet: run `eit classify` or submit a classify job first."
      : null;
  let notice: string | null = null;
  let scatterSvg: string | null = null;

  function pickRun(runId: string): void {
    selectedRun = runs.find((r) => r.run_id === runId) ?? null;
    rows = [];
    expandedText = null;
    scatterSvg = null;
    message = null;
    notice = null;
    if (selectedRun === null) {
      draw();
      return;
    }
    hooks
      .loadClasses(selectedRun.run_id)
      .then((payload) => {
        rows = sortRows(flaggedRows(payload), sortKey, ascending);
        if (rows.length === 0) {
          message = "this run flagged nothing as non-earnest.";
        }
        draw();
      })
      .catch((err: unknown) => {
        message =
          err instanceof ApiError && err.status === 404
            ? "unknown run: it may have been created in another data directory. pick a run from the list."
            : err instanceof Error
              ? err.message
              : String(err);
        draw();
      });
  }

  function correct(text: string, value: number): void {
    if (selectedRun === null) return;
    hooks
      .submitCorrection(selectedRun.question_id, text, value)
      .then(() => {
        notice = `label saved for "${text}"; the next classification run trains on it.`;
        draw();
      })
      .catch((err: unknown) => {
        if (err instanceof ApiError && err.status === 401) {
          hooks.onAuthError();
          return;
        }
        notice = err instanceof Error ? err.message : String(err);
        draw();
      });
  }

  function draw(): void {
    clear(root);
    root.append(el("h2", {}, "triage"));

    const picker = el("select", { class: "run-picker" });
    picker.append(el("option", { value: "" }, "pick a run"));
    for (const run of runs) {
      const option = el(
        "option",
        { value: run.run_id },
        `${run.run_id} (${run.question_id})`,
      );
      if (selectedRun?.run_id === run.run_id) option.selected = true;
      picker.append(option);
    }
    picker.addEventListener("change", () => pickRun(picker.value));
    root.append(picker);

    if (message !== null) {
      root.append(el("p", { class: "empty", "data-testid": "empty" }, message));
    }
    if (notice !== null) {
      root.append(el("p", { class: "notice", role: "status" }, notice));
    }

    if (selectedRun !== null && rows.length > 0) {
      root.append(makeTable());
      const projectBtn = el("button", { class: "project-btn" }, "project question");
      projectBtn.addEventListener("click", () => {
        notice = "projecting...";
        draw();
        hooks
          .project(selectedRun!.question_id)
          .then((points) => {
            scatterSvg = buildScatterSvg(points);
            notice = null;
            draw();
          })
          .catch((err: unknown) => {
            notice = err instanceof Error ? err.message : String(err);
            draw();
          });
      });
      root.append(projectBtn);
    }

    if (scatterSvg !== null) {
      const holder = el("div", { class: "scatter", "data-testid": "scatter" });
      holder.innerHTML = scatterSvg;
      root.append(holder);
    }
  }

  function makeTable(): HTMLElement {
    const table = el("table", { class: "flagged" });
    const marginHeader = el(
      "th",
      { class: "sortable", "data-key": "margin" },
      `margin ${sortKey === "margin" ? (ascending ? "^" : "v") : ""}`,
    );
    const textHeader = el(
      "th",
      { class: "sortable", "data-key": "text" },
      `response ${sortKey === "text" ? (ascending ? "^" : "v") : ""}`,
    );
    for (const header of [marginHeader, textHeader]) {
      header.addEventListener("click", () => {
        const key = header.getAttribute("data-key") as SortKey;
        ascending = key === sortKey ? !ascending : true;
        sortKey = key;
        rows = sortRows(rows, sortKey, ascending);
        draw();
      });
    }
    table.append(el("thead", {}, el("tr", {}, textHeader, marginHeader)));

    const body = el("tbody", {});
    for (const row of rows) {
      const tr = el(
        "tr",
        { class: "flagged-row", "data-text": row.text },
        el("td", {}, row.text),
        el("td", {}, row.margin.toFixed(3)),
      );
      tr.addEventListener("click", () => {
        expandedText = expandedText === row.text ? null : row.text;
        draw();
      });
      body.append(tr);
      if (expandedText === row.text) {
        body.append(makeEvidenceRow(row));
      }
    }
    table.append(body);
    return table;
  }

  function makeEvidenceRow(row: FlaggedRow): HTMLElement {
    const neighbors = el("table", { class: "neighbors" });
    neighbors.append(
      el(
        "thead",
        {},
        el("tr", {}, el("th", {}, "neighbor"), el("th", {}, "label"), el("th", {}, "distance")),
      ),
    );
    const body = el("tbody", {});
    for (const n of row.neighbors) {
      body.append(
        el(
          "tr",
          {},
          el("td", {}, n.text),
          el("td", {}, n.label),
          el("td", {}, n.distance.toFixed(4)),
        ),
      );
    }
    neighbors.append(body);

    const corrections = el("div", { class: "corrections" }, "correct to: ");
    for (let value = SCORE_MIN; value <= SCORE_MAX; value += 1) {
      const button = el(
        "button",
        { class: "correct-btn", "data-score": String(value) },
        String(value),
      );
      button.addEventListener("click", (event) => {
        event.stopPropagation();
        correct(row.text, value);
      });
      corrections.append(button);
    }

    return el(
      "tr",
      { class: "evidence-row" },
      el("td", { colspan: "2" }, neighbors, corrections),
    );
  }

  draw();
  return () => undefined;
}

// --------------------------------------------------------------- atrisk

export function renderAtRiskPanel(
  root: HTMLElement,
  entries: AtRiskEntry[],
): Cleanup {
  clear(root);
  root.append(el("h2", {}, "at-risk students"));
  if (entries.length === 0) {
    root.append(
      el(
        "p",
        { class: "empty" },
        "nobody crosses the threshold; classify recent questions first if runs are missing.",
      ),
    );
    return () => undefined;
  }
  const table = el("table", { class: "atrisk" });
  table.append(
    el(
      "thead",
      {},
      el(
        "tr",
        {},
        el("th", {}, "student"),
        el("th", {}, "window fraction"),
        el("th", {}, "responses"),
        el("th", {}, "non-earnest"),
      ),
    ),
  );
  const body = el("tbody", {});
  for (const row of atRiskRows(entries)) {
    body.append(
      el(
        "tr",
        { "data-student": row.studentId },
        el("td", {}, row.studentId),
        el("td", {}, row.fraction.toFixed(6)),
        el("td", {}, String(row.responses)),
        el("td", {}, String(row.nonEarnest)),
      ),
    );
  }
  table.append(body);
  root.append(table);
  return () => undefined;
}

// ------------------------------------------------------------ questions

export function renderQuestionsPanel(
  root: HTMLElement,
  questions: QuestionSummary[],
): Cleanup {
  clear(root);
  root.append(el("h2", {}, "questions"));
  const table = el("table", { class: "questions" });
  table.append(
    el(
      "thead",
      {},
      el(
        "tr",
        {},
        el("th", {}, "id"),
        el("th", {}, "lecture"),
        el("th", {}, "prompt"),
        el("th", {}, "responses"),
        el("th", {}, "unique"),
        el("th", {}, ""),
      ),
    ),
  );
  const body = el("tbody", {});
  for (const q of questions) {
    body.append(
      el(
        "tr",
        {},
        el("td", {}, q.question_id),
        el("td", {}, String(q.lecture_number)),
        el("td", {}, q.text),
        el("td", {}, String(q.responses)),
        el("td", {}, String(q.unique_responses)),
        el(
          "td",
          {},
          el("a", { href: `#/label/${q.question_id}` }, "label"),
        ),
      ),
    );
  }
  table.append(body);
  root.append(table);
  return () => undefined;
}

// -------------------------------------------------------------- session

export interface SessionValues {
  annotator: string;
  token: string;
}

export function renderSessionForm(
  root: HTMLElement,
  current: SessionValues,
  onSave: (values: SessionValues) => void,
): Cleanup {
  clear(root);
  const annotator = el("input", {
    type: "text",
    name: "annotator",
    placeholder: "annotator id",
    value: current.annotator,
  });
  const token = el("input", {
    type: "password",
    name: "token",
    placeholder: "api token",
    value: current.token,
  });
  const save = el("button", { class: "session-save" }, "save session");
  save.addEventListener("click", () =>
    onSave({ annotator: annotator.value.trim(), token: token.value.trim() }),
  );
  root.append(
    el("h2", {}, "session"),
    el(
      "p",
      {},
      "labels are recorded under your annotator id; mutations need the api token.",
    ),
    annotator,
    token,
    save,
  );
  return () => undefined;
}
