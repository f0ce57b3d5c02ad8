// Entry point: landing form (participant id + bank picker) wiring into
// the session flow.

import { SurveyApi } from "./api.js";
import { clear, el } from "./dom.js";
import { SessionFlow } from "./session.js";

async function init(): Promise<void> {
  const mount = document.getElementById("app");
  if (!mount) return;
  const api = new SurveyApi();
  const flow = new SessionFlow(api, mount, window.localStorage);

  let banks;
  try {
    banks = await api.banks();
  } catch {
    mount.append(el("p", { role: "alert" }, ["The survey service is unreachable."]));
    return;
  }

  const select = el("select", { id: "bank" });
  for (const bank of banks) {
    select.append(el("option", { value: bank.bank_id }, [
      `${bank.bank_id} (${bank.kind}, ${bank.total_questions} questions)`,
    ]));
  }
  const participant = el("input", {
    type: "text", id: "participant", placeholder: "your participant id",
  });
  const begin = el("button", { type: "button" }, ["Start survey"]);
  begin.addEventListener("click", () => {
    const pid = participant.value.trim();
    if (!pid) return;
    clear(mount);
    void flow.start(pid, select.value);
  });

  mount.append(
    el("div", { class: "landing" }, [
      el("h1", {}, ["Topic surveys"]),
      el("label", {}, ["Participant id", participant]),
      el("label", {}, ["Survey", select]),
      begin,
    ]),
  );
}

document.addEventListener("DOMContentLoaded", () => void init());
