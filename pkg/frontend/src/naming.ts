// Cluster-naming question view: keyword list, six expandable example
// posts, and a one-or-two-word name input with an N/A escape hatch.

import type { NamingQuestionPayload } from "./api.js";
import { el } from "./dom.js";
import { errorView } from "./validation.js";

export const NO_NAME = "N/A";

export function isNamingPayload(q: unknown): q is NamingQuestionPayload {
  if (typeof q !== "object" || q === null) return false;
  const obj = q as Record<string, unknown>;
  return (
    typeof obj.question_id === "string" &&
    Array.isArray(obj.keywords) &&
    obj.keywords.length === 10 &&
    Array.isArray(obj.example_posts) &&
    obj.example_posts.every(
      (p) =>
        typeof p === "object" && p !== null &&
        typeof (p as any).title === "string" &&
        typeof (p as any).body_preview === "string",
    )
  );
}

export function validName(raw: string): boolean {
  const name = raw.trim();
  if (name === NO_NAME) return true;
  if (!name || name.includes("|")) return false;
  return name.split(/\s+/).length <= 2;
}

export function renderNamingQuestion(
  question: NamingQuestionPayload,
  onSubmit: (name: string) => void,
): HTMLElement {
  if (!isNamingPayload(question)) {
    return errorView("the question payload does not match the expected schema");
  }

  const root = el("div", { class: "question naming-question" });
  root.append(el("p", { class: "prompt" }, [
    "Give this cluster a short name (one or two words), based on its keywords and example posts.",
  ]));
  root.append(
    el("ul", { class: "keywords" }, question.keywords.map((w) => el("li", {}, [w]))),
  );

  const posts = el("div", { class: "example-posts" });
  for (const post of question.example_posts) {
    // titles collapsed by default; clicking expands the 100-word preview
    posts.append(
      el("details", { class: "example-post" }, [
        el("summary", { class: "post-title" }, [post.title]),
        el("p", { class: "post-preview" }, [post.body_preview]),
      ]),
    );
  }
  root.append(posts);

  const nameInput = el("input", {
    type: "text",
    class: "name-input",
    placeholder: "cluster name (1-2 words)",
  });
  const naBox = el("input", { type: "checkbox", class: "na-box", id: "na-box" });
  naBox.addEventListener("change", () => {
    nameInput.disabled = naBox.checked;
    update();
  });
  nameInput.addEventListener("input", update);

  const warning = el("p", { class: "warning", hidden: "hidden" }, [
    "A name is one or two words; tick N/A if no coherent name is possible.",
  ]);
  const submit = el("button", { type: "button", class: "submit" }, ["Submit name"]);
  submit.disabled = true;

  function currentAnswer(): string | null {
    if (naBox.checked) return NO_NAME;
    const name = nameInput.value.trim();
    return name && validName(name) ? name : null;
  }

  function update(): void {
    const ok = currentAnswer() !== null;
    submit.disabled = !ok;
    warning.hidden = ok || (!naBox.checked && nameInput.value.trim() === "");
  }

  submit.addEventListener("click", () => {
    const answer = currentAnswer();
    if (answer === null) {
      warning.hidden = false;
      return;
    }
    submit.disabled = true;
    onSubmit(answer);
  });

  root.append(
    el("div", { class: "name-controls" }, [
      el("label", {}, ["Name", nameInput]),
      el("label", { class: "na-label" }, [naBox, "N/A - no coherent name"]),
    ]),
    warning,
    submit,
  );
  return root;
}
