// Subtask Gantt: one lane per robot, chips draggable between lanes to emit
// a reassign intervention. Layout geometry is a pure function under test.

import { GanttPayload, GanttRow } from "../types.js";

export interface Chip {
  subtask: string;
  task: string;
  robot: string;
  lane: number;
  x: number;
  width: number;
}

export interface GanttLayout {
  lanes: string[];
  chips: Chip[];
  scale: number; // px per ms
  spanMs: number;
}

export function computeGanttLayout(rows: GanttRow[], widthPx: number,
                                   laneOrder?: string[]): GanttLayout {
  const lanes = laneOrder ?? [...new Set(rows.map((r) => r.robot))].sort();
  const laneIx = new Map(lanes.map((robot, i) => [robot, i]));
  const t0 = rows.length ? Math.min(...rows.map((r) => r.start_ms)) : 0;
  const t1 = rows.length ? Math.max(...rows.map((r) => r.end_ms)) : 1;
  const spanMs = Math.max(1, t1 - t0);
  const scale = widthPx / spanMs;
  const chips = rows.map((r) => ({
    subtask: r.subtask,
    task: r.task,
    robot: r.robot,
    lane: laneIx.get(r.robot) ?? 0,
    x: (r.start_ms - t0) * scale,
    width: Math.max(2, (r.end_ms - r.start_ms) * scale),
  }));
  return { lanes, chips, scale, spanMs };
}

const LANE_H = 26;
const TASK_HUES = [200, 120, 30, 275, 0, 160, 55, 320];

export function taskColor(task: string): string {
  let hash = 0;
  for (const ch of task) hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
  return `hsl(${TASK_HUES[hash % TASK_HUES.length]}, 65%, 55%)`;
}

export class GanttView {
  private dragging: Chip | null = null;

  constructor(private root: HTMLElement,
              private onReassign: (subtask: string, robot: string) => void) {}

  render(payload: GanttPayload): void {
    const width = Math.max(300, this.root.clientWidth - 140);
    const layout = computeGanttLayout(payload.subtasks, width);
    const height = Math.max(1, layout.lanes.length) * LANE_H + 24;
    const svgRows: string[] = [];
    layout.lanes.forEach((robot, i) => {
      const y = i * LANE_H + 18;
      svgRows.push(
        `<text x="0" y="${y + 14}" class="lane-label">${robot}</text>`,
        `<line x1="120" y1="${y + LANE_H - 4}" x2="${width + 130}" ` +
        `y2="${y + LANE_H - 4}" class="lane-line"/>`);
    });
    for (const chip of layout.chips) {
      const y = chip.lane * LANE_H + 20;
      svgRows.push(
        `<g class="chip" data-subtask="${chip.subtask}" data-robot="${chip.robot}">` +
        `<rect x="${130 + chip.x}" y="${y}" width="${chip.width}" height="16"` +
        ` rx="3" fill="${taskColor(chip.task)}"><title>${chip.subtask}` +
        ` (${chip.task})</title></rect></g>`);
    }
    this.root.innerHTML =
      `<svg width="${width + 140}" height="${height}">${svgRows.join("")}</svg>`;
    this.wireDrag(layout);
  }

  private wireDrag(layout: GanttLayout): void {
    const svg = this.root.querySelector("svg");
    if (!svg) return;
    svg.querySelectorAll<SVGGElement>("g.chip").forEach((g) => {
      g.addEventListener("pointerdown", () => {
        const subtask = g.dataset.subtask ?? "";
        this.dragging = layout.chips.find((c) => c.subtask === subtask) ?? null;
      });
    });
    svg.addEventListener("pointerup", (ev) => {
      if (!this.dragging) return;
      const rect = svg.getBoundingClientRect();
      const lane = Math.floor((ev.clientY - rect.top - 18) / LANE_H);
      const robot = layout.lanes[lane];
      if (robot && robot !== this.dragging.robot) {
        this.onReassign(this.dragging.subtask, robot);
      }
      this.dragging = null;
    });
  }
}
