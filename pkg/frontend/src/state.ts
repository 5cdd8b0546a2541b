// Console view model: a pure fold over the run-log event stream plus local
// selections. Replaying the same stream always reproduces the same model.

import { LogRecord } from "./types.js";

export interface TimelineEntry {
  t: number;
  ev: string;
  summary: string;
}

export interface ViewModel {
  cursor: number;
  taskStatus: Record<string, string>;
  taskGroup: Record<string, string>;
  verdicts: Record<string, string>;
  distances: Record<string, number | null>;
  completions: { task: string; t: number }[];
  interventionsAccepted: number;
  interventionsRejected: number;
  timeline: TimelineEntry[];
  lastEventMs: number;
}

export function emptyModel(): ViewModel {
  return {
    cursor: 0,
    taskStatus: {},
    taskGroup: {},
    verdicts: {},
    distances: {},
    completions: [],
    interventionsAccepted: 0,
    interventionsRejected: 0,
    timeline: [],
    lastEventMs: 0,
  };
}

const TIMELINE_EVENTS = new Set([
  "task_started", "task_completed", "task_failed", "adaptation",
  "intervention", "exploration_result", "scheme_selected", "robot_failed",
  "approval_pending", "approval_resolved", "manual_skill",
]);

function summarize(rec: LogRecord): string {
  const parts: string[] = [];
  for (const key of Object.keys(rec).sort()) {
    if (key === "t" || key === "ev") continue;
    const value = rec[key];
    if (typeof value === "string" || typeof value === "number" ||
        typeof value === "boolean") {
      parts.push(`${key}=${value}`);
    }
  }
  return parts.join(" ");
}

export function applyRecord(model: ViewModel, rec: LogRecord): ViewModel {
  const next: ViewModel = {
    ...model,
    taskStatus: { ...model.taskStatus },
    taskGroup: { ...model.taskGroup },
    verdicts: { ...model.verdicts },
    distances: { ...model.distances },
    completions: model.completions.slice(),
    timeline: model.timeline.slice(),
  };
  next.cursor = model.cursor + 1;
  next.lastEventMs = rec.t;
  switch (rec.ev) {
    case "task_created":
      next.taskStatus[rec["task"] as string] = "pending";
      break;
    case "task_started":
      next.taskStatus[rec["task"] as string] = "running";
      next.taskGroup[rec["task"] as string] = rec["group"] as string;
      break;
    case "task_completed":
      next.taskStatus[rec["task"] as string] = "completed";
      next.completions.push({ task: rec["task"] as string, t: rec.t });
      break;
    case "task_failed":
      next.taskStatus[rec["task"] as string] = "failed";
      break;
    case "mission_update":
      next.verdicts[rec["mission"] as string] = rec["verdict"] as string;
      next.distances[rec["mission"] as string] =
        rec["distance"] as number | null;
      break;
    case "intervention":
      if (rec["accepted"]) next.interventionsAccepted += 1;
      else next.interventionsRejected += 1;
      break;
    default:
      break;
  }
  if (TIMELINE_EVENTS.has(rec.ev)) {
    next.timeline.push({ t: rec.t, ev: rec.ev, summary: summarize(rec) });
  }
  return next;
}

export function replay(records: LogRecord[],
                       from?: ViewModel): ViewModel {
  let model = from ?? emptyModel();
  for (const rec of records) {
    model = applyRecord(model, rec);
  }
  return model;
}
