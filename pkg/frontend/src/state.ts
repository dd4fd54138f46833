// Chat state machine mirroring the server-side session stages. Pure reducer
// so the flow is testable without a DOM.

import type { AnswerCard, FactorQuestion, SessionView } from "./api.js";

export type Bubble =
  | { kind: "user"; text: string }
  | { kind: "assistant"; text: string }
  | { kind: "choices"; questions: FactorQuestion[] }
  | { kind: "answer"; card: AnswerCard }
  | { kind: "error"; text: string };

export type ChatState = {
  phase: "idle" | "waiting" | "choosing" | "done" | "failed";
  sessionId: string | null;
  questions: FactorQuestion[];
  selections: Record<string, string>;
  bubbles: Bubble[];
};

export const initialState: ChatState = {
  phase: "idle",
  sessionId: null,
  questions: [],
  selections: {},
  bubbles: [],
};

export type Action =
  | { type: "asked"; question: string }
  | { type: "session"; view: SessionView }
  | { type: "selected"; factor: string; value: string }
  | { type: "failed"; message: string };

export function reduce(state: ChatState, action: Action): ChatState {
  switch (action.type) {
    case "asked":
      return {
        ...initialState,
        phase: "waiting",
        bubbles: [...state.bubbles, { kind: "user", text: action.question }],
      };
    case "session":
      return applyView(state, action.view);
    case "selected":
      return {
        ...state,
        selections: { ...state.selections, [action.factor]: action.value },
      };
    case "failed":
      return {
        ...state,
        phase: "failed",
        bubbles: [...state.bubbles, { kind: "error", text: action.message }],
      };
  }
}

function applyView(state: ChatState, view: SessionView): ChatState {
  const sessionId = view.session_id ?? state.sessionId;
  if (view.stage === "AwaitingFactors") {
    const questions = view.questions ?? [];
    return {
      ...state,
      phase: "choosing",
      sessionId,
      questions,
      selections: {},
      bubbles: [...state.bubbles, { kind: "choices", questions }],
    };
  }
  if (view.stage === "Answered" && view.answer) {
    return {
      ...state,
      phase: "done",
      sessionId,
      bubbles: [...state.bubbles, { kind: "answer", card: view.answer }],
    };
  }
  return {
    ...state,
    phase: "failed",
    sessionId,
    bubbles: [
      ...state.bubbles,
      { kind: "error", text: `no answer (${view.failure_reason ?? view.stage})` },
    ],
  };
}

export function allAnswered(state: ChatState): boolean {
  return state.questions.every((q) => (state.selections[q.factor] ?? "") !== "");
}
