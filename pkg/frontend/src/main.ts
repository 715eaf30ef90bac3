/** Entry point: problem picker plus one proof board per tab. */

import { TutorApi } from "./api.js";
import { ProofBoard } from "./app.js";
import { toDisplay } from "./notation.js";

async function boot(): Promise<void> {
  const api = new TutorApi("");
  const picker = document.getElementById("picker") as HTMLElement;
  const boardRoot = document.getElementById("board") as HTMLElement;
  const board = new ProofBoard(boardRoot, api);

  let problems;
  try {
    problems = await api.listProblems();
  } catch (err) {
    picker.textContent = `Could not load problems: ${String(err)}`;
    const retry = document.createElement("button");
    retry.type = "button";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void boot());
    picker.appendChild(retry);
    return;
  }

  picker.textContent = "";
  const label = document.createElement("label");
  label.textContent = "Choose a problem: ";
  label.htmlFor = "problem-select";
  const select = document.createElement("select");
  select.id = "problem-select";
  for (const problem of problems) {
    const option = document.createElement("option");
    option.value = problem.id;
    option.textContent = `${problem.id} (level ${problem.level}): prove ${toDisplay(problem.conclusion)}`;
    select.appendChild(option);
  }
  const start = document.createElement("button");
  start.type = "button";
  start.textContent = "Start session";
  start.addEventListener("click", () => void board.start(select.value));
  picker.append(label, select, start);
}

void boot();
