// Survey session flow: create (or resume) a session, pass the screening
// question, answer the assigned questions, reach the completion screen.

import { ApiError } from "./api.js";
import type { NextPayload, QuestionPayload, SessionInfo, SubmitAck } from "./api.js";
import { clear, el } from "./dom.js";
import { renderNamingQuestion } from "./naming.js";
import { renderValidationQuestion } from "./validation.js";

export interface SurveyApiLike {
  createSession(participantId: string, bankId: string): Promise<SessionInfo>;
  nextQuestion(sessionId: string): Promise<NextPayload>;
  submitAnswer(sessionId: string, questionId: string, selections: string[]): Promise<SubmitAck>;
}

export type Screen =
  | "question"
  | "screening"
  | "done"
  | "screening_failed"
  | "already_participated"
  | "survey_closed"
  | "error";

interface StoredSession {
  sessionId: string;
  participantId: string;
}

export class SessionFlow {
  screen: Screen | "idle" = "idle";
  sessionId = "";
  private prompt = "";

  constructor(
    private readonly api: SurveyApiLike,
    private readonly mount: HTMLElement,
    private readonly storage: Pick<Storage, "getItem" | "setItem" | "removeItem">,
  ) {}

  private storageKey(bankId: string): string {
    return `threadtopics:session:${bankId}`;
  }

  async start(participantId: string, bankId: string): Promise<void> {
    const stored = this.storage.getItem(this.storageKey(bankId));
    if (stored) {
      // resuming after a reload: the server replays the next unanswered question
      const parsed = JSON.parse(stored) as StoredSession;
      if (parsed.participantId === participantId) {
        this.sessionId = parsed.sessionId;
        try {
          await this.refresh();
          return;
        } catch {
          this.storage.removeItem(this.storageKey(bankId));
        }
      }
    }
    try {
      const session = await this.api.createSession(participantId, bankId);
      this.sessionId = session.session_id;
      this.prompt = session.prompt;
      this.storage.setItem(
        this.storageKey(bankId),
        JSON.stringify({ sessionId: session.session_id, participantId }),
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        if (err.message.includes("saturated")) {
          this.showClosed();
        } else {
          this.showAlreadyParticipated();
        }
        return;
      }
      this.showError(err);
      return;
    }
    await this.refresh();
  }

  async refresh(): Promise<void> {
    let next: NextPayload;
    try {
      next = await this.api.nextQuestion(this.sessionId);
    } catch (err) {
      this.showError(err);
      return;
    }
    if (next.prompt) this.prompt = next.prompt;
    switch (next.status) {
      case "done":
        this.showDone(next);
        return;
      case "screening_failed":
        this.showScreeningFailed();
        return;
      case "screening":
      case "question":
        this.screen = next.status === "screening" ? "screening" : "question";
        this.renderQuestion(next);
        return;
    }
  }

  private progressBar(next: NextPayload): HTMLElement {
    const pct = next.total ? Math.round((100 * next.answered) / next.total) : 0;
    const fill = el("div", { class: "progress-fill" });
    fill.style.width = `${pct}%`;
    return el("div", { class: "progress" }, [
      el("div", { class: "progress-bar" }, [fill]),
      el("span", { class: "progress-text" }, [`${next.answered} / ${next.total} answered`]),
    ]);
  }

  private renderQuestion(next: NextPayload): void {
    const question = next.question as QuestionPayload;
    const submit = async (selections: string[]) => {
      try {
        const ack = await this.api.submitAnswer(this.sessionId, question.question_id, selections);
        if (this.screen === "screening" && ack.screening_passed === false) {
          this.showScreeningFailed();
          return;
        }
      } catch (err) {
        this.showError(err);
        return;
      }
      await this.refresh();
    };

    const view =
      question.kind === "naming"
        ? renderNamingQuestion(question, (name) => void submit([name]))
        : renderValidationQuestion(question, this.prompt, (s) => void submit(s.selections));

    clear(this.mount);
    if (this.screen === "screening") {
      this.mount.append(
        el("p", { class: "screening-note" }, [
          "Training question: answer it correctly to unlock the survey.",
        ]),
      );
    } else {
      this.mount.append(this.progressBar(next));
    }
    this.mount.append(view);
  }

  private showDone(next: NextPayload): void {
    this.screen = "done";
    clear(this.mount);
    const reflection = el("textarea", {
      class: "final-reflection",
      placeholder: "Any closing thoughts about the survey? (optional)",
    });
    this.mount.append(
      this.progressBar(next),
      el("div", { class: "done-screen" }, [
        el("h2", {}, ["All done - thank you!"]),
        el("p", {}, [`You answered ${next.answered} questions.`]),
        el("label", {}, ["Final comments", reflection]),
      ]),
    );
  }

  private showScreeningFailed(): void {
    this.screen = "screening_failed";
    clear(this.mount);
    this.mount.append(
      el("div", { class: "failed-screen" }, [
        el("h2", {}, ["Survey ended"]),
        el("p", {}, [
          "The training question was not answered correctly, so the survey cannot continue. Thank you for your time.",
        ]),
      ]),
    );
  }

  private showAlreadyParticipated(): void {
    this.screen = "already_participated";
    clear(this.mount);
    this.mount.append(
      el("div", { class: "already-screen" }, [
        el("h2", {}, ["Already participated"]),
        el("p", {}, ["Each participant can enter this survey only once."]),
      ]),
    );
  }

  private showClosed(): void {
    this.screen = "survey_closed";
    clear(this.mount);
    this.mount.append(
      el("div", { class: "closed-screen" }, [
        el("h2", {}, ["Survey closed"]),
        el("p", {}, ["All questions already have enough answers. Thank you for your interest."]),
      ]),
    );
  }

  private showError(err: unknown): void {
    this.screen = "error";
    const message = err instanceof Error ? err.message : String(err);
    clear(this.mount);
    this.mount.append(
      el("div", { class: "error-screen", role: "alert" }, [
        el("h2", {}, ["Something went wrong"]),
        el("p", {}, [message]),
      ]),
    );
  }
}
