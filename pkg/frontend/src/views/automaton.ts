// Mission automaton view: states laid out by distance-to-acceptance, the
// current reachable set highlighted, the executed trace listed, and a badge
// with the remaining distance.

import { AutomatonSnapshot } from "../types.js";

export function layoutColumns(snapshot: AutomatonSnapshot):
    Map<number, { col: number; row: number }> {
  // column = distance (unreachable states park in the last column)
  const distances = snapshot.states
    .map((s) => (s.distance === null ? -1 : s.distance));
  const maxd = Math.max(0, ...distances);
  const placed = new Map<number, { col: number; row: number }>();
  const rowCount: Record<number, number> = {};
  for (const state of snapshot.states) {
    const col = state.distance === null ? maxd + 1 : state.distance;
    const row = rowCount[col] ?? 0;
    rowCount[col] = row + 1;
    placed.set(state.id, { col, row });
  }
  return placed;
}

export function verdictBadge(snapshot: AutomatonSnapshot): string {
  if (snapshot.verdict === "accepting") return "accepting";
  if (snapshot.min_distance === null) {
    return snapshot.verdict;
  }
  return `${snapshot.verdict} (${snapshot.min_distance} to go)`;
}

const COL_W = 96;
const ROW_H = 56;

export class AutomatonView {
  constructor(private root: HTMLElement) {}

  render(snapshots: AutomatonSnapshot[], selected: string | null): void {
    const pick = snapshots.find((s) => s.mission === selected) ?? snapshots[0];
    if (!pick) {
      this.root.innerHTML = "<p class='muted'>no missions yet</p>";
      return;
    }
    const options = snapshots.map((s) =>
      `<option value="${s.mission}" ${s.mission === pick.mission ? "selected" : ""}>` +
      `${s.mission} [${s.verdict}]</option>`).join("");
    const placed = layoutColumns(pick);
    const cols = 2 + Math.max(...[...placed.values()].map((p) => p.col));
    const rows = 1 + Math.max(...[...placed.values()].map((p) => p.row));
    const parts: string[] = [];
    for (const tr of pick.transitions) {
      const a = placed.get(tr.src);
      const b = placed.get(tr.dst);
      if (!a || !b) continue;
      const x1 = 40 + a.col * COL_W, y1 = 32 + a.row * ROW_H;
      const x2 = 40 + b.col * COL_W, y2 = 32 + b.row * ROW_H;
      if (tr.src === tr.dst) {
        parts.push(`<path d="M ${x1 - 8} ${y1 - 14} C ${x1 - 22} ${y1 - 34}, ` +
          `${x1 + 22} ${y1 - 34}, ${x1 + 8} ${y1 - 14}" class="edge"/>`);
      } else {
        parts.push(`<line x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}"` +
          ` class="edge"><title>${tr.guard}</title></line>`);
      }
    }
    for (const state of pick.states) {
      const p = placed.get(state.id)!;
      const x = 40 + p.col * COL_W, y = 32 + p.row * ROW_H;
      const classes = ["state"];
      if (state.current) classes.push("current");
      if (state.accepting) classes.push("accepting");
      parts.push(`<g class="${classes.join(" ")}">` +
        `<circle cx="${x}" cy="${y}" r="13"/>` +
        (state.accepting ? `<circle cx="${x}" cy="${y}" r="9" class="inner"/>` : "") +
        (state.initial ? `<line x1="${x - 28}" y1="${y}" x2="${x - 14}" y2="${y}" class="edge"/>` : "") +
        `<title>q${state.id}: ${state.descriptor}` +
        ` (distance ${state.distance ?? "inf"})</title></g>`);
    }
    const traceText = pick.trace
      .map((t) => `${(t.t_ms / 1000).toFixed(1)}s {${t.label.join(",")}}`)
      .join(" → ") || "(no observations yet)";
    this.root.innerHTML = `
      <div class="bar">
        <select id="mission-picker">${options}</select>
        <span class="badge ${pick.verdict}">${verdictBadge(pick)}</span>
      </div>
      <svg width="${80 + cols * COL_W}" height="${40 + rows * ROW_H}">
        ${parts.join("")}
      </svg>
      <div class="trace">trace: ${traceText}</div>`;
  }

  onPick(handler: (mission: string) => void): void {
    const select = this.root.querySelector<HTMLSelectElement>("#mission-picker");
    select?.addEventListener("change", () => handler(select.value));
  }
}
