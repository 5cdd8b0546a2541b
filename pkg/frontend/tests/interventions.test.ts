import { describe, expect, it } from "vitest";
import {
  confirmPlan, defineRegion, reassignSubtask, relabelFeature, selectScheme,
  toTraceRecord, triggerSkill, validateIntervention,
} from "../src/interventions.js";

// Payload fixtures the headless replayer accepts (mirrored from the Python
// service tests); builders must serialize to exactly these shapes.
const ACCEPTED_SHAPES: Record<string, object> = {
  relabel_feature: {
    kind: "relabel_feature", feature: "af_1",
    new_type: "high_voltage_electrical_flame",
  },
  confirm_or_edit_plan: { kind: "confirm_or_edit_plan", approval: "ap1" },
  select_scheme: { kind: "select_scheme", task: "af_1", scheme_index: 1 },
  reassign_subtask: {
    kind: "reassign_subtask", subtask: "tp_1_s0_n4", robot: "g1_uav",
  },
  define_region: {
    kind: "define_region", resource_type: "water",
    polygon: [[60, 40], [80, 40], [80, 70], [60, 70]],
  },
  trigger_skill: {
    kind: "trigger_skill", robot: "g2_uav", skill: "inspect",
    target: [100, 40],
  },
};

describe("intervention builders", () => {
  it("serialize to the scripted-trace shapes", () => {
    expect(relabelFeature("af_1", "high_voltage_electrical_flame"))
      .toEqual(ACCEPTED_SHAPES.relabel_feature);
    expect(confirmPlan("ap1")).toEqual(ACCEPTED_SHAPES.confirm_or_edit_plan);
    expect(selectScheme("af_1", 1)).toEqual(ACCEPTED_SHAPES.select_scheme);
    expect(reassignSubtask("tp_1_s0_n4", "g1_uav"))
      .toEqual(ACCEPTED_SHAPES.reassign_subtask);
    expect(defineRegion("water", [[60, 40], [80, 40], [80, 70], [60, 70]]))
      .toEqual(ACCEPTED_SHAPES.define_region);
    expect(triggerSkill("g2_uav", "inspect", [100, 40]))
      .toEqual(ACCEPTED_SHAPES.trigger_skill);
  });

  it("every fixture passes local validation", () => {
    for (const shape of Object.values(ACCEPTED_SHAPES)) {
      expect(validateIntervention(shape as never)).toEqual([]);
    }
  });

  it("rejects short polygons and unknown kinds", () => {
    expect(validateIntervention(defineRegion("water", [[0, 0], [1, 1]])))
      .toContain("region polygon needs at least 3 vertices");
    expect(validateIntervention({ kind: "fly_away" } as never)[0])
      .toMatch(/unknown intervention kind/);
  });

  it("edited plans carry the steps array", () => {
    const steps = [{ required_skill: "inspect", resource: "", dependency: [] }];
    const iv = confirmPlan("ap2", undefined, steps);
    expect(iv).toEqual({
      kind: "confirm_or_edit_plan", approval: "ap2", scheme: steps,
    });
  });

  it("trace records are stable and sorted", () => {
    const record = toTraceRecord(reassignSubtask("s1", "r2"), 1234);
    // payload keys sorted, so the byte form is deterministic
    expect(record).toBe(
      '{"kind":"reassign_subtask","payload":{"robot":"r2","subtask":"s1"},' +
      '"t":1234}');
  });
});
