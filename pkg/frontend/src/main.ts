/**
 * App bootstrap: session storage, hash routing, panel lifecycle.
 *
 * Session state is annotator id + api token in localStorage; everything
 * else is refetched per route, so a reload reproduces any view from
 * server state alone.
 */

import { ApiClient } from "./api.js";
import type { JobRecord, ProjectedPoint } from "./api.js";
import { LabelQueue } from "./queue.js";
import {
  renderAtRiskPanel,
  renderLabelPanel,
  renderQuestionsPanel,
  renderSessionForm,
  renderTriagePanel,
} from "./views.js";
import type { Cleanup } from "./views.js";

const SAMPLE_N = 200;
const SAMPLE_SEED = 0;

const root = document.querySelector<HTMLDivElement>("#app");
if (root === null) throw new Error("missing #app root");

const client = new ApiClient("", localStorage.getItem("eit.token"));
let cleanup: Cleanup = () => undefined;

function annotator(): string {
  return localStorage.getItem("eit.annotator") ?? "";
}

function showError(err: unknown): void {
  root!.replaceChildren();
  const p = document.createElement("p");
  p.className = "error";
  p.setAttribute("role", "alert");
  p.textContent = err instanceof Error ? err.message : String(err);
  root!.append(p);
}

function gotoSession(): void {
  window.location.hash = "#/session";
}

async function projectQuestion(question: string): Promise<ProjectedPoint[]> {
  const submitted = await client.submitProject({ question, seed: 42, iterations: 500 });
  const done: JobRecord = await client.waitForJob(submitted.job_id);
  const result = done.result as { points: ProjectedPoint[] };
  return result.points;
}

async function route(): Promise<void> {
  cleanup();
  cleanup = () => undefined;
  const hash = window.location.hash || "#/questions";
  const [, view, arg] = hash.split("/");

  try {
    if (view === "session") {
      cleanup = renderSessionForm(
        root!,
        { annotator: annotator(), token: localStorage.getItem("eit.token") ?? "" },
        (values) => {
          localStorage.setItem("eit.annotator", values.annotator);
          localStorage.setItem("eit.token", values.token);
          client.setToken(values.token || null);
          window.location.hash = "#/questions";
        },
      );
      return;
    }

    if (view === "label" && arg) {
      if (annotator() === "") {
        gotoSession();
        return;
      }
      const [sample, labels] = await Promise.all([
        client.sample(arg, SAMPLE_N, SAMPLE_SEED),
        client.labels(arg),
      ]);
      const queue = new LabelQueue(arg, annotator(), sample.items, labels);
      cleanup = renderLabelPanel(root!, queue, {
        submitLabel: (text, score) => client.postLabel(annotator(), arg, text, score),
        onAuthError: gotoSession,
      });
      return;
    }

    if (view === "triage") {
      const runs = await client.runs();
      cleanup = renderTriagePanel(root!, runs, {
        loadClasses: (runId) => client.runClasses(runId),
        submitCorrection: (question, text, score) =>
          client.postLabel(annotator(), question, text, score),
        project: projectQuestion,
        onAuthError: gotoSession,
      });
      return;
    }

    if (view === "atrisk") {
      const entries = await client.atRisk();
      cleanup = renderAtRiskPanel(root!, entries);
      return;
    }

    const questions = await client.questions();
    cleanup = renderQuestionsPanel(root!, questions);
  } catch (err) {
    showError(err);
  }
}

window.addEventListener("hashchange", () => void route());
void route();
