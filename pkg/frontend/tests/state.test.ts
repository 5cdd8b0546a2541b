import { describe, expect, it } from "vitest";
import { applyRecord, emptyModel, replay } from "../src/state.js";
import { LogRecord } from "../src/types.js";

const STREAM: LogRecord[] = [
  { t: 0, ev: "run_start", scenario: "demo", seed: 1 },
  { t: 0, ev: "task_created", task: "tp_1", type: "trapped_person" },
  { t: 0, ev: "task_started", task: "tp_1", group: "g1" },
  { t: 500, ev: "mission_update", mission: "done_tp_1",
    verdict: "progressing", distance: 1 },
  { t: 900, ev: "subtask_completed", subtask: "tp_1_s0_n1", task: "tp_1",
    robots: ["g1_dog"], started: 100, ended: 900 },
  { t: 1200, ev: "task_completed", task: "tp_1" },
  { t: 1200, ev: "mission_update", mission: "done_tp_1",
    verdict: "accepting", distance: 0 },
  { t: 1300, ev: "intervention", kind: "define_region", accepted: true },
  { t: 1400, ev: "intervention", kind: "trigger_skill", accepted: false,
    reason: "robot busy" },
];

describe("view model", () => {
  it("folds the stream into task / mission state", () => {
    const model = replay(STREAM);
    expect(model.taskStatus).toEqual({ tp_1: "completed" });
    expect(model.verdicts).toEqual({ done_tp_1: "accepting" });
    expect(model.distances).toEqual({ done_tp_1: 0 });
    expect(model.completions).toEqual([{ task: "tp_1", t: 1200 }]);
    expect(model.interventionsAccepted).toBe(1);
    expect(model.interventionsRejected).toBe(1);
    expect(model.cursor).toBe(STREAM.length);
    expect(model.lastEventMs).toBe(1400);
  });

  it("is a pure function of the stream", () => {
    const a = replay(STREAM);
    const b = replay(STREAM);
    expect(a).toEqual(b);
  });

  it("incremental application equals batch replay", () => {
    let incremental = emptyModel();
    for (const rec of STREAM) incremental = applyRecord(incremental, rec);
    expect(incremental).toEqual(replay(STREAM));
  });

  it("does not mutate prior models (resync safety)", () => {
    const base = replay(STREAM.slice(0, 3));
    const snapshot = JSON.parse(JSON.stringify(base));
    replay(STREAM.slice(3), base);
    expect(base).toEqual(snapshot);
  });

  it("keeps only notable events on the timeline", () => {
    const model = replay(STREAM);
    const kinds = model.timeline.map((e) => e.ev);
    expect(kinds).toEqual([
      "task_started", "task_completed", "intervention", "intervention",
    ]);
    expect(model.timeline[0].summary).toContain("task=tp_1");
  });
});
