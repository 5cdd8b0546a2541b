// Console wiring: one event-stream subscription feeds the pure view model;
// renders re-pull snapshots; every action goes through the intervention
// builders and the retry queue.

import { ApiClient, RetryQueue, subscribeEvents } from "./api.js";
import { confirmPlan, defineRegion, reassignSubtask, relabelFeature,
         triggerSkill, Intervention } from "./interventions.js";
import { applyRecord, emptyModel, ViewModel } from "./state.js";
import { Ack, LogRecord } from "./types.js";
import { ApprovalsView } from "./views/approvals.js";
import { AutomatonView } from "./views/automaton.js";
import { GanttView } from "./views/gantt.js";
import { MapView } from "./views/map.js";

const client = new ApiClient("");
let model: ViewModel = emptyModel();
let selectedMission: string | null = null;
let dirty = false;

const statusEl = document.getElementById("status")!;
const timelineEl = document.getElementById("timeline")!;

function note(text: string): void {
  statusEl.textContent = text;
}

const queue = new RetryQueue(client, (iv: Intervention, ack: Ack) => {
  note(ack.accepted
    ? `${iv.kind} acknowledged at ${ack.t ? (ack.t / 1000).toFixed(1) : "?"}s`
    : `${iv.kind} rejected: ${ack.reason}`);
  dirty = true;
});

const ganttView = new GanttView(
  document.getElementById("gantt")!,
  (subtask, robot) => { void queue.submit(reassignSubtask(subtask, robot)); });

const mapView = new MapView(document.getElementById("map")!, {
  onRegion: (rtype, polygon) => {
    void queue.submit(defineRegion(rtype, polygon));
  },
  onTriggerSkill: (robot, skill, target) => {
    void queue.submit(triggerSkill(robot, skill, target));
  },
});

const approvalsView = new ApprovalsView(document.getElementById("approvals")!, {
  onApprove: (approval, schemeIndex) => {
    void queue.submit(confirmPlan(approval, schemeIndex));
  },
  onEdit: (approval, steps) => {
    void queue.submit(confirmPlan(approval, undefined, steps));
  },
  onRelabel: (feature, newType) => {
    void queue.submit(relabelFeature(feature, newType));
  },
});

const automatonView = new AutomatonView(document.getElementById("automaton")!);

function renderTimeline(): void {
  const items = model.timeline.slice(-40).reverse().map((entry) =>
    `<li><span class="t">${(entry.t / 1000).toFixed(1)}s</span> ` +
    `<b>${entry.ev}</b> ${entry.summary}</li>`).join("");
  timelineEl.innerHTML = `<ul>${items}</ul>`;
}

async function refresh(): Promise<void> {
  try {
    const [state, gantt, automata] = await Promise.all([
      client.state(), client.gantt(), client.automata()]);
    mapView.render(state);
    ganttView.render(gantt);
    approvalsView.render(state, 10);
    automatonView.render(automata, selectedMission);
    automatonView.onPick((mission) => {
      selectedMission = mission;
      dirty = true;
    });
    const done = state.tasks.filter((t) => t.status === "completed").length;
    note(`${state.scenario} seed ${state.seed} | t=${(state.time_ms / 1000)
      .toFixed(1)}s | tasks ${done}/${state.tasks.length} | ` +
      `pending actions ${queue.badge}`);
  } catch (err) {
    note(`disconnected: ${err}; retrying`);
  }
  renderTimeline();
}

function onRecord(rec: LogRecord): void {
  model = applyRecord(model, rec);
  dirty = true;
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  if (params.get("autostart") === "1") {
    await client.startRun(Number(params.get("seed") ?? "0"),
                          Number(params.get("rate") ?? "10"));
  }
  subscribeEvents("", onRecord, () => {
    note("run ended");
    dirty = true;
  });
  setInterval(() => {
    if (dirty) {
      dirty = false;
      void refresh();
      void queue.flush();
    }
  }, 250);
  dirty = true;
}

void start();
