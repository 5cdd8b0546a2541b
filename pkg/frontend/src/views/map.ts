// Arena map: robots, features, resources, drawn regions; click-to-draw
// polygon mode emits define_region, and the skill form emits trigger_skill.

import { RunState } from "../types.js";

export interface MapCallbacks {
  onRegion: (resourceType: string, polygon: [number, number][]) => void;
  onTriggerSkill: (robot: string, skill: string,
                   target: [number, number]) => void;
}

const GLYPH: Record<string, string> = {
  UHeli: "◆", UAV: "▲", UGV: "■", TUGV: "▣", Dog: "●",
};

export class MapView {
  drawing: [number, number][] | null = null;
  private regionType = "water";

  constructor(private root: HTMLElement, private hooks: MapCallbacks) {}

  render(state: RunState): void {
    const [w, h] = state.arena;
    const scale = Math.min(560 / w, 420 / h);
    const sx = (x: number) => (x * scale).toFixed(1);
    const sy = (y: number) => ((h - y) * scale).toFixed(1);
    const parts: string[] = [];
    for (const [rtype, polygon] of Object.entries(state.regions)) {
      const pts = polygon.map(([x, y]) => `${sx(x)},${sy(y)}`).join(" ");
      parts.push(`<polygon points="${pts}" class="region">` +
        `<title>${rtype} search region</title></polygon>`);
    }
    if (this.drawing && this.drawing.length) {
      const pts = this.drawing.map(([x, y]) => `${sx(x)},${sy(y)}`).join(" ");
      parts.push(`<polyline points="${pts}" class="region drawing"/>`);
    }
    for (const f of state.features) {
      parts.push(`<g class="feature ${f.status}">` +
        `<rect x="${sx(f.pos[0])}" y="${sy(f.pos[1])}" width="9" height="9"/>` +
        `<title>${f.id} (${f.type}, ${f.status})</title></g>`);
    }
    for (const r of state.resources) {
      if (!r.discovered) continue;
      parts.push(`<g class="resource">` +
        `<circle cx="${sx(r.pos[0])}" cy="${sy(r.pos[1])}" r="3.5"/>` +
        `<title>${r.id} (${r.type})</title></g>`);
    }
    for (const robot of state.robots) {
      const cls = robot.failed ? "robot failed" : "robot";
      parts.push(`<text x="${sx(robot.pos[0])}" y="${sy(robot.pos[1])}"` +
        ` class="${cls}" data-robot="${robot.id}">` +
        `${GLYPH[robot.platform] ?? "?"}<title>${robot.id} ` +
        `(${robot.platform}, ${robot.activity ?? "idle"})</title></text>`);
    }
    this.root.innerHTML = `
      <div class="bar">
        <label>region for <input id="region-type" size="9"
          value="${this.regionType}"></label>
        <button id="region-start">draw region</button>
        <button id="region-finish" disabled>finish</button>
        <label>skill <input id="skill-robot" size="7" placeholder="robot">
          <input id="skill-name" size="8" placeholder="skill"></label>
        <button id="skill-go">trigger at next click</button>
      </div>
      <svg id="arena" width="${(w * scale).toFixed(0)}"
           height="${(h * scale).toFixed(0)}"
           viewBox="0 0 ${(w * scale).toFixed(0)} ${(h * scale).toFixed(0)}">
        ${parts.join("")}
      </svg>`;
    this.wire(state, scale, h);
  }

  private wire(state: RunState, scale: number, arenaH: number): void {
    const svg = this.root.querySelector<SVGSVGElement>("#arena");
    const startBtn = this.root.querySelector<HTMLButtonElement>("#region-start");
    const finishBtn = this.root.querySelector<HTMLButtonElement>("#region-finish");
    const typeInput = this.root.querySelector<HTMLInputElement>("#region-type");
    const skillBtn = this.root.querySelector<HTMLButtonElement>("#skill-go");
    if (!svg || !startBtn || !finishBtn || !typeInput || !skillBtn) return;
    let skillArmed = false;

    startBtn.addEventListener("click", () => {
      this.regionType = typeInput.value.trim();
      this.drawing = [];
      finishBtn.disabled = false;
    });
    finishBtn.addEventListener("click", () => {
      if (this.drawing && this.drawing.length >= 3) {
        this.hooks.onRegion(this.regionType, this.drawing);
      }
      this.drawing = null;
      finishBtn.disabled = true;
    });
    skillBtn.addEventListener("click", () => {
      skillArmed = true;
    });
    svg.addEventListener("click", (ev) => {
      const rect = svg.getBoundingClientRect();
      const x = (ev.clientX - rect.left) / scale;
      const y = arenaH - (ev.clientY - rect.top) / scale;
      const point: [number, number] =
        [Math.round(x * 10) / 10, Math.round(y * 10) / 10];
      if (this.drawing) {
        this.drawing.push(point);
      } else if (skillArmed) {
        const robot = this.root
          .querySelector<HTMLInputElement>("#skill-robot")?.value ?? "";
        const skill = this.root
          .querySelector<HTMLInputElement>("#skill-name")?.value ?? "";
        if (robot && skill) this.hooks.onTriggerSkill(robot, skill, point);
        skillArmed = false;
      }
    });
  }
}
