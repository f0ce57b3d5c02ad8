// Topic-validation question view: post, four topic checkboxes, exclusive
// none-of-the-above, and a free-text reflection box.

import type { ValidationQuestionPayload } from "./api.js";
import { el } from "./dom.js";

export const NONE_OPTION = "NONE_OF_THE_ABOVE";
export const NONE_LABEL = "None of the above";

export interface ValidationSubmission {
  selections: string[];
  reflection: string;
}

export function isValidationPayload(q: unknown): q is ValidationQuestionPayload {
  if (typeof q !== "object" || q === null) return false;
  const obj = q as Record<string, unknown>;
  return (
    typeof obj.question_id === "string" &&
    typeof obj.title === "string" &&
    typeof obj.body === "string" &&
    Array.isArray(obj.options) &&
    obj.options.length === 4 &&
    obj.options.every((o) => typeof o === "string")
  );
}

export function errorView(message: string): HTMLElement {
  return el("div", { class: "error-view", role: "alert" }, [
    el("p", {}, [`Something went wrong: ${message}`]),
  ]);
}

export function renderValidationQuestion(
  question: ValidationQuestionPayload,
  prompt: string,
  onSubmit: (submission: ValidationSubmission) => void,
): HTMLElement {
  if (!isValidationPayload(question)) {
    return errorView("the question payload does not match the expected schema");
  }

  const root = el("div", { class: "question validation-question" });
  root.append(el("p", { class: "prompt" }, [prompt]));
  root.append(el("h2", { class: "post-title" }, [question.title]));
  root.append(el("div", { class: "post-body" }, [question.body]));

  const topicBoxes: HTMLInputElement[] = [];
  const optionList = el("div", { class: "options" });
  // options are rendered exactly in the order the server randomized them
  for (const option of question.options) {
    const box = el("input", { type: "checkbox", value: option, id: `opt-${option}` });
    box.addEventListener("change", () => {
      if (box.checked) noneBox.checked = false;
      update();
    });
    topicBoxes.push(box);
    optionList.append(el("label", { class: "option" }, [box, option]));
  }
  const noneBox = el("input", { type: "checkbox", value: NONE_OPTION, id: "opt-none" });
  noneBox.addEventListener("change", () => {
    if (noneBox.checked) {
      for (const box of topicBoxes) box.checked = false;
    }
    update();
  });
  optionList.append(el("label", { class: "option none-option" }, [noneBox, NONE_LABEL]));
  root.append(optionList);

  const reflection = el("textarea", {
    class: "reflection",
    placeholder: "Anything unclear or surprising about this question? (optional)",
  });
  root.append(el("label", { class: "reflection-label" }, ["Comments", reflection]));

  const warning = el("p", { class: "warning", hidden: "hidden" }, [
    "Select at least one topic, or none of the above.",
  ]);
  const submit = el("button", { type: "button", class: "submit" }, ["Submit answer"]);
  submit.disabled = true;
  root.append(warning, submit);

  function selections(): string[] {
    if (noneBox.checked) return [NONE_OPTION];
    return topicBoxes.filter((b) => b.checked).map((b) => b.value);
  }

  function update(): void {
    const any = selections().length > 0;
    submit.disabled = !any;
    warning.hidden = any;
  }

  submit.addEventListener("click", () => {
    const selected = selections();
    if (selected.length === 0) {
      warning.hidden = false;
      return; // zero-selection submissions never reach the wire
    }
    submit.disabled = true;
    onSubmit({ selections: selected, reflection: reflection.value });
  });

  return root;
}
