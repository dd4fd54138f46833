// Browser bootstrap: wires the reducer + renderer to the page. All protocol
// logic lives in api.ts / state.ts; this file only handles DOM events.

import { LabragClient, LabragApiError } from "./api.js";
import { allAnswered, initialState, reduce, type Action, type ChatState } from "./state.js";
import { renderChat } from "./render.js";

const client = new LabragClient("");
let state: ChatState = initialState;

const chatEl = document.getElementById("chat")!;
const formEl = document.getElementById("ask-form") as HTMLFormElement;
const inputEl = document.getElementById("ask-input") as HTMLInputElement;

function dispatch(action: Action): void {
  state = reduce(state, action);
  chatEl.innerHTML = renderChat(state);
}

async function ask(question: string): Promise<void> {
  dispatch({ type: "asked", question });
  try {
    dispatch({ type: "session", view: await client.createSession(question) });
  } catch (err) {
    const message =
      err instanceof LabragApiError ? err.body.message : "server unreachable";
    dispatch({ type: "failed", message });
  }
}

async function submit(): Promise<void> {
  if (!state.sessionId || !allAnswered(state)) return;
  try {
    const view = await client.submitAnswers(state.sessionId, state.selections);
    dispatch({ type: "session", view });
  } catch (err) {
    const message =
      err instanceof LabragApiError ? err.body.message : "server unreachable";
    dispatch({ type: "failed", message });
  }
}

formEl.addEventListener("submit", (event) => {
  event.preventDefault();
  const question = inputEl.value.trim();
  if (question) {
    inputEl.value = "";
    void ask(question);
  }
});

chatEl.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.matches("button.choice")) {
    dispatch({
      type: "selected",
      factor: target.dataset.factor!,
      value: target.dataset.value!,
    });
  } else if (target.matches("button.submit-answers")) {
    void submit();
  }
});

chatEl.addEventListener("change", (event) => {
  const target = event.target as HTMLElement;
  if (target.matches("input.free-text")) {
    const input = target as HTMLInputElement;
    dispatch({ type: "selected", factor: input.dataset.factor!, value: input.value });
  }
});
