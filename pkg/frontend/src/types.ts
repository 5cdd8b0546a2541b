// API payload shapes mirrored from the service.

export interface RobotInfo {
  id: string;
  platform: string;
  group: string;
  pos: [number, number];
  failed: boolean;
  activity: string | null;
}

export interface FeatureInfo {
  id: string;
  type: string;
  status: "undiscovered" | "discovered" | "handled";
  pos: [number, number];
}

export interface ResourceInfo {
  id: string;
  type: string;
  discovered: boolean;
  pos: [number, number];
}

export interface TaskInfo {
  id: string;
  type: string;
  group: string | null;
  status: string;
  scheme: number | null;
  started_ms: number | null;
  completed_ms: number | null;
}

export interface MissionInfo {
  id: string;
  verdict: "progressing" | "accepting" | "violated" | "unreachable";
  distance: number | null;
  formula: string;
}

export interface SchemeStep {
  subtask: string;
  skill: string;
  resource: string;
  robots: number;
  exploration: boolean;
}

export interface ApprovalCard {
  id: string;
  task: string;
  schemes: { scheme: number; steps: SchemeStep[] }[];
}

export interface RunState {
  time_ms: number;
  status: "running" | "ended";
  scenario: string;
  seed: number;
  arena: [number, number];
  robots: RobotInfo[];
  features: FeatureInfo[];
  resources: ResourceInfo[];
  regions: Record<string, [number, number][]>;
  tasks: TaskInfo[];
  missions: MissionInfo[];
  pending_approvals: ApprovalCard[];
  metrics: Record<string, unknown>;
}

export interface AutomatonStateInfo {
  id: number;
  descriptor: string;
  initial: boolean;
  accepting: boolean;
  current: boolean;
  distance: number | null;
}

export interface AutomatonSnapshot {
  mission: string;
  formula: string;
  verdict: MissionInfo["verdict"];
  min_distance: number | null;
  states: AutomatonStateInfo[];
  transitions: { src: number; dst: number; guard: string }[];
  trace: { t_ms: number; label: string[] }[];
  distance_history: (number | null)[];
}

export interface GanttRow {
  subtask: string;
  task: string;
  robot: string;
  start_ms: number;
  end_ms: number;
}

export interface TaskGanttRow {
  task: string;
  type: string;
  group: string;
  start_ms: number | null;
  end_ms: number | null;
}

export interface GanttPayload {
  tasks: TaskGanttRow[];
  subtasks: GanttRow[];
}

export interface LogRecord {
  t: number;
  ev: string;
  [key: string]: unknown;
}

export interface Ack {
  accepted: boolean;
  reason: string;
  t: number | null;
}
