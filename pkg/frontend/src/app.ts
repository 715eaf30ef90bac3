/** Proof board controller.
 *
 * Renders the numbered statement list, the 16-rule palette, dual-mode
 * step entry (structured: rule + parent lines with server-derived
 * candidates; or a typed formula), the feedback panel, and the tiered
 * hint control. All mutations flow through awaited requests and the
 * board always re-renders from the server's response, never from local
 * inference. Every control is a real <button> or <input>, so the whole
 * flow is keyboard reachable.
 */

import { BoardView, StepResult, TutorApi } from "./api.js";
import { RULES, ruleArity, toDisplay, validateFormula } from "./notation.js";

export class ProofBoard {
  board: BoardView | null = null;
  selectedRule: string | null = null;
  selectedParents: number[] = [];
  hintTier: "tutor" | "teacher" = "tutor";
  lastResult: StepResult | null = null;

  private root: HTMLElement;

  constructor(root: HTMLElement, private api: TutorApi) {
    this.root = root;
  }

  async start(problemId: string): Promise<void> {
    try {
      this.board = await this.api.createSession(problemId);
    } catch (err) {
      this.renderError(String(err));
      return;
    }
    this.selectedRule = null;
    this.selectedParents = [];
    this.lastResult = null;
    this.render("");
  }

  /** Submit whatever sits in the step input, with the selected rule and
   * parent lines. Malformed formulas are rejected locally. */
  async submitTyped(): Promise<void> {
    if (!this.board || this.board.completed) return;
    const input = this.stepInput();
    const parseError = validateFormula(input.value);
    if (parseError) {
      this.setFeedback(`Cannot read that statement: ${parseError}`, "error");
      return;
    }
    if (!this.selectedRule) {
      this.setFeedback("Pick the inference rule you applied.", "error");
      return;
    }
    const result = await this.api.submitStep(
      this.board.session_id,
      input.value,
      this.selectedRule,
      [...this.selectedParents],
    );
    this.lastResult = result;
    this.board = result.board;
    this.selectedRule = null;
    this.selectedParents = [];
    this.render(result.feedback, result);
  }

  async showCandidates(): Promise<void> {
    if (!this.board || !this.selectedRule) return;
    if (this.selectedParents.length !== ruleArity(this.selectedRule)) {
      this.setFeedback(
        `${this.selectedRule} needs ${ruleArity(this.selectedRule)} parent line(s); ` +
          `select them by number.`,
        "error",
      );
      return;
    }
    const reply = await this.api.deriveCandidates(
      this.board.session_id,
      this.selectedRule,
      [...this.selectedParents],
    );
    const zone = this.root.querySelector("#candidates") as HTMLElement;
    zone.textContent = "";
    if (reply.candidates.length === 0) {
      zone.textContent = "That rule yields nothing from the selected lines.";
      return;
    }
    for (const candidate of reply.candidates) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "candidate";
      button.textContent = toDisplay(candidate);
      button.setAttribute("aria-label", `use candidate ${candidate}`);
      button.addEventListener("click", () => {
        this.stepInput().value = candidate;
      });
      zone.appendChild(button);
    }
  }

  async requestHint(): Promise<void> {
    if (!this.board || this.board.completed) return;
    const hint = await this.api.requestHint(this.board.session_id, this.hintTier);
    const zone = this.root.querySelector("#hint") as HTMLElement;
    if (this.hintTier === "tutor") {
      zone.textContent = `Hint: try to derive ${toDisplay(hint.statement)}`;
    } else {
      zone.textContent = `Hint: ${hint.scaffold ?? hint.statement}`;
    }
  }

  toggleParent(index: number): void {
    const at = this.selectedParents.indexOf(index);
    if (at >= 0) {
      this.selectedParents.splice(at, 1);
    } else {
      this.selectedParents.push(index);
      const cap = this.selectedRule ? ruleArity(this.selectedRule) : 2;
      while (this.selectedParents.length > cap) {
        this.selectedParents.shift();
      }
    }
    this.refreshSelectionView();
  }

  selectRule(ruleId: string): void {
    this.selectedRule = this.selectedRule === ruleId ? null : ruleId;
    const cap = this.selectedRule ? ruleArity(this.selectedRule) : 2;
    while (this.selectedParents.length > cap) {
      this.selectedParents.shift();
    }
    this.refreshSelectionView();
  }

  private stepInput(): HTMLInputElement {
    return this.root.querySelector("#step-input") as HTMLInputElement;
  }

  private setFeedback(text: string, kind: "server" | "error"): void {
    const panel = this.root.querySelector("#feedback") as HTMLElement;
    panel.textContent = text;
    panel.dataset.kind = kind;
  }

  private renderError(message: string): void {
    this.root.textContent = "";
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.setAttribute("role", "alert");
    banner.textContent = `Could not reach the tutoring service: ${message}`;
    const retry = document.createElement("button");
    retry.type = "button";
    retry.textContent = "Retry";
    banner.appendChild(retry);
    this.root.appendChild(banner);
  }

  private refreshSelectionView(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".rule-button")) {
      button.setAttribute("aria-pressed", String(button.dataset.rule === this.selectedRule));
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>(".statement")) {
      const index = Number(button.dataset.index);
      button.setAttribute("aria-pressed", String(this.selectedParents.includes(index)));
    }
    const status = this.root.querySelector("#selection") as HTMLElement;
    const ruleText = this.selectedRule ?? "none";
    const parentText = this.selectedParents.length ? this.selectedParents.join(", ") : "none";
    status.textContent = `Rule: ${ruleText} | Parent lines: ${parentText}`;
  }

  /** Rebuild the whole board from the current server view. */
  render(feedbackText: string, result?: StepResult): void {
    const board = this.board;
    if (!board) return;
    this.root.textContent = "";

    const heading = document.createElement("h2");
    heading.textContent = `Problem ${board.problem_id} (level ${board.level})`;
    this.root.appendChild(heading);

    const goal = document.createElement("div");
    goal.id = "conclusion";
    goal.className = "conclusion-banner";
    goal.textContent = board.completed
      ? `Proof complete: ${toDisplay(board.conclusion)} derived.`
      : `Prove: ${toDisplay(board.conclusion)}`;
    if (board.completed) {
      goal.classList.add("completed");
      goal.setAttribute("role", "status");
    }
    this.root.appendChild(goal);

    const list = document.createElement("ol");
    list.id = "statements";
    list.setAttribute("aria-label", "proof statements; activate to select as parent");
    for (const statement of board.statements) {
      const item = document.createElement("li");
      const button = document.createElement("button");
      button.type = "button";
      button.className = "statement";
      button.dataset.index = String(statement.index);
      button.setAttribute("aria-pressed", "false");
      const origin =
        statement.origin === "premise"
          ? "given"
          : `${statement.rule}: ${(statement.parents ?? []).join(", ")}`;
      button.textContent = `(${statement.index}) ${toDisplay(statement.text)}  [${origin}]`;
      button.addEventListener("click", () => this.toggleParent(statement.index));
      item.appendChild(button);
      list.appendChild(item);
    }
    this.root.appendChild(list);

    const palette = document.createElement("div");
    palette.id = "rule-palette";
    palette.setAttribute("role", "group");
    palette.setAttribute("aria-label", "inference rules");
    for (const rule of RULES) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "rule-button";
      button.dataset.rule = rule.id;
      button.title = rule.name;
      button.textContent = rule.id;
      button.setAttribute("aria-pressed", "false");
      button.addEventListener("click", () => this.selectRule(rule.id));
      palette.appendChild(button);
    }
    this.root.appendChild(palette);

    const selection = document.createElement("div");
    selection.id = "selection";
    selection.setAttribute("role", "status");
    this.root.appendChild(selection);

    const entry = document.createElement("div");
    entry.id = "entry";
    const input = document.createElement("input");
    input.id = "step-input";
    input.type = "text";
    input.placeholder = "next statement, e.g. (M * N) or ~K";
    input.setAttribute("aria-label", "next statement");
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") void this.submitTyped();
    });
    const submit = document.createElement("button");
    submit.id = "submit-step";
    submit.type = "button";
    submit.textContent = "Submit step";
    submit.disabled = board.completed;
    submit.addEventListener("click", () => void this.submitTyped());
    const candidatesButton = document.createElement("button");
    candidatesButton.id = "show-candidates";
    candidatesButton.type = "button";
    candidatesButton.textContent = "Show candidates";
    candidatesButton.disabled = board.completed;
    candidatesButton.addEventListener("click", () => void this.showCandidates());
    entry.append(input, submit, candidatesButton);
    this.root.appendChild(entry);

    const candidates = document.createElement("div");
    candidates.id = "candidates";
    candidates.setAttribute("aria-label", "derivable candidates");
    this.root.appendChild(candidates);

    const hintControls = document.createElement("div");
    hintControls.id = "hint-controls";
    const tierToggle = document.createElement("button");
    tierToggle.id = "hint-tier";
    tierToggle.type = "button";
    tierToggle.textContent = `Hint tier: ${this.hintTier}`;
    tierToggle.setAttribute("aria-label", "toggle hint tier");
    tierToggle.addEventListener("click", () => {
      this.hintTier = this.hintTier === "tutor" ? "teacher" : "tutor";
      tierToggle.textContent = `Hint tier: ${this.hintTier}`;
    });
    const hintButton = document.createElement("button");
    hintButton.id = "get-hint";
    hintButton.type = "button";
    hintButton.textContent = "Request hint";
    hintButton.disabled = board.completed;
    hintButton.addEventListener("click", () => void this.requestHint());
    hintControls.append(tierToggle, hintButton);
    this.root.appendChild(hintControls);

    const hint = document.createElement("div");
    hint.id = "hint";
    hint.setAttribute("role", "status");
    this.root.appendChild(hint);

    const feedback = document.createElement("div");
    feedback.id = "feedback";
    feedback.setAttribute("role", "status");
    this.root.appendChild(feedback);
    if (feedbackText) {
      this.setFeedback(feedbackText, "server");
    }

    if (result) {
      const verdict = document.createElement("div");
      verdict.id = "verdict";
      const justified = result.classification.justified ? "justified" : "unjustified";
      verdict.textContent = `${result.classification.category}, ${justified}`;
      verdict.dataset.accepted = String(result.accepted);
      this.root.appendChild(verdict);
    }

    this.refreshSelectionView();
  }
}
