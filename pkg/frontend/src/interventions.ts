// Intervention builders: every UI action funnels through these so the
// payloads stay byte-compatible with the scripted-trace schema the headless
// replayer accepts (the parity contract).

export type Intervention =
  | { kind: "relabel_feature"; feature: string; new_type: string }
  | { kind: "confirm_or_edit_plan"; approval: string; scheme?: unknown[];
      scheme_index?: number }
  | { kind: "select_scheme"; task: string; scheme_index: number }
  | { kind: "reassign_subtask"; subtask: string; robot: string }
  | { kind: "define_region"; resource_type: string;
      polygon: [number, number][] }
  | { kind: "trigger_skill"; robot: string; skill: string;
      target: [number, number] };

export function relabelFeature(feature: string, newType: string): Intervention {
  return { kind: "relabel_feature", feature, new_type: newType };
}

export function confirmPlan(approval: string, schemeIndex?: number,
                            editedSteps?: unknown[]): Intervention {
  const iv: Intervention = { kind: "confirm_or_edit_plan", approval };
  if (schemeIndex !== undefined) iv.scheme_index = schemeIndex;
  if (editedSteps !== undefined) iv.scheme = editedSteps;
  return iv;
}

export function selectScheme(task: string, schemeIndex: number): Intervention {
  return { kind: "select_scheme", task, scheme_index: schemeIndex };
}

export function reassignSubtask(subtask: string, robot: string): Intervention {
  return { kind: "reassign_subtask", subtask, robot };
}

export function defineRegion(resourceType: string,
                             polygon: [number, number][]): Intervention {
  return { kind: "define_region", resource_type: resourceType, polygon };
}

export function triggerSkill(robot: string, skill: string,
                             target: [number, number]): Intervention {
  return { kind: "trigger_skill", robot, skill, target };
}

const REQUIRED_KEYS: Record<string, string[]> = {
  relabel_feature: ["feature", "new_type"],
  confirm_or_edit_plan: ["approval"],
  select_scheme: ["task", "scheme_index"],
  reassign_subtask: ["subtask", "robot"],
  define_region: ["resource_type", "polygon"],
  trigger_skill: ["robot", "skill", "target"],
};

// Local pre-flight check; mirrors the server-side schema so obviously bad
// actions never leave the console.
export function validateIntervention(iv: Intervention): string[] {
  const problems: string[] = [];
  const required = REQUIRED_KEYS[iv.kind];
  if (!required) {
    return [`unknown intervention kind ${(iv as { kind: string }).kind}`];
  }
  for (const key of required) {
    if ((iv as Record<string, unknown>)[key] === undefined) {
      problems.push(`missing ${key}`);
    }
  }
  if (iv.kind === "define_region" && iv.polygon.length < 3) {
    problems.push("region polygon needs at least 3 vertices");
  }
  if (iv.kind === "trigger_skill" && iv.target.length !== 2) {
    problems.push("target must be [x, y]");
  }
  return problems;
}

// Scripted-trace line for a recorded action, identical to what the server
// writes into recorded_interventions.jsonl.
export function toTraceRecord(iv: Intervention, tMs: number): string {
  const payload: Record<string, unknown> = {};
  for (const key of Object.keys(iv).sort()) {
    if (key !== "kind") payload[key] = (iv as Record<string, unknown>)[key];
  }
  return JSON.stringify({ kind: iv.kind, payload, t: tMs });
}
