// Approval queue: scheme cards with their step tables, approve or edit.
// The countdown reminds the operator that the server auto-approves.

import { ApprovalCard, RunState } from "../types.js";

export interface ApprovalCallbacks {
  onApprove: (approval: string, schemeIndex?: number) => void;
  onEdit: (approval: string, steps: unknown[]) => void;
  onRelabel: (feature: string, newType: string) => void;
}

export class ApprovalsView {
  constructor(private root: HTMLElement, private hooks: ApprovalCallbacks) {}

  render(state: RunState, autoApproveSeconds: number): void {
    const cards = state.pending_approvals.map(
      (card) => this.cardHtml(card)).join("");
    const relabel = `
      <div class="relabel">
        <b>relabel feature</b>
        <input id="relabel-id" size="8" placeholder="feature">
        <input id="relabel-type" size="18" placeholder="new type">
        <button id="relabel-go">apply</button>
      </div>`;
    this.root.innerHTML = cards
      ? `<p class="muted">auto-approve after ${autoApproveSeconds}s of ` +
        `mission time</p>${cards}${relabel}`
      : `<p class="muted">no pending approvals</p>${relabel}`;
    this.wire(state);
  }

  private cardHtml(card: ApprovalCard): string {
    const schemes = card.schemes.map((scheme, ix) => {
      const steps = scheme.steps.map((step) =>
        `<tr><td>${step.subtask}</td><td>${step.skill}</td>` +
        `<td>${step.resource || "-"}</td><td>${step.robots}</td>` +
        `<td>${step.exploration ? "explore" : ""}</td></tr>`).join("");
      return `
        <details ${ix === 0 ? "open" : ""}>
          <summary>scheme ${scheme.scheme}</summary>
          <table><tr><th>subtask</th><th>required_skill</th>
            <th>resource</th><th>robots</th><th></th></tr>${steps}</table>
          <button class="approve" data-approval="${card.id}"
            data-scheme="${ix}">approve scheme ${scheme.scheme}</button>
        </details>`;
    }).join("");
    return `
      <div class="card" data-task="${card.task}">
        <b>${card.task}</b> awaits plan confirmation
        ${schemes}
        <details><summary>edit as JSON steps</summary>
          <textarea rows="6" cols="46" class="edit-area"
            data-approval="${card.id}"></textarea>
          <button class="submit-edit" data-approval="${card.id}">
            submit edited scheme</button>
        </details>
      </div>`;
  }

  private wire(_state: RunState): void {
    this.root.querySelectorAll<HTMLButtonElement>("button.approve")
      .forEach((btn) => btn.addEventListener("click", () => {
        this.hooks.onApprove(btn.dataset.approval ?? "",
                             Number(btn.dataset.scheme ?? "0"));
      }));
    this.root.querySelectorAll<HTMLButtonElement>("button.submit-edit")
      .forEach((btn) => btn.addEventListener("click", () => {
        const approval = btn.dataset.approval ?? "";
        const area = this.root.querySelector<HTMLTextAreaElement>(
          `textarea[data-approval="${approval}"]`);
        if (!area) return;
        try {
          const steps = JSON.parse(area.value) as unknown[];
          this.hooks.onEdit(approval, steps);
        } catch (err) {
          area.classList.add("invalid");
        }
      }));
    const go = this.root.querySelector<HTMLButtonElement>("#relabel-go");
    go?.addEventListener("click", () => {
      const fid = this.root.querySelector<HTMLInputElement>("#relabel-id");
      const ftype = this.root.querySelector<HTMLInputElement>("#relabel-type");
      if (fid?.value && ftype?.value) {
        this.hooks.onRelabel(fid.value.trim(), ftype.value.trim());
      }
    });
  }
}
