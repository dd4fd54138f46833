// Minimal in-process implementation of the labrag /v1 JSON contract, used by
// the contract tests. Canned corpus: ESR (two factor questions) and Aldolase
// (factorless, answered immediately).

import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";

export const DISCLAIMER =
  "This information is for educational purposes only and is not medical advice. " +
  "Talk to your health care provider about your results.";

export const ESR_QUESTIONS = [
  { factor: "Age", choices: ["over 50", "under 50"], allows_free_text: false },
  { factor: "Sex", choices: ["Male", "Female"], allows_free_text: false },
];

export const ESR_ANSWER = {
  text: "0 to 20 mm/hr",
  source_url: "https://ency.example.org/article/esr.htm",
  factors_applied: { Age: "over 50", Sex: "Male" },
  disclaimer: DISCLAIMER,
};

export const ALDOLASE_ANSWER = {
  text: "Normal results range between 1.0 to 7.5 units per liter (0.02 to 0.13 microkat/L).",
  source_url: "https://ency.example.org/article/aldolase.htm",
  factors_applied: {},
  disclaimer: DISCLAIMER,
};

type MockSession = { stage: string; lab: "esr" | "aldolase" };

function error(code: string, message: string, details: object = {}) {
  return { code, message, details };
}

export async function startMockServer(): Promise<{ url: string; close: () => Promise<void> }> {
  const sessions = new Map<string, MockSession>();
  let counter = 0;

  const server: Server = createServer((req, res) => {
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      const send = (status: number, body: object) => {
        res.writeHead(status, { "Content-Type": "application/json" });
        res.end(JSON.stringify(body));
      };
      const url = req.url ?? "";

      if (req.method === "GET" && url === "/v1/health") {
        return send(200, { status: "ok", index_size: 122, provider_kind: "oracle" });
      }

      if (req.method === "POST" && url === "/v1/sessions") {
        const body = JSON.parse(Buffer.concat(chunks).toString() || "{}");
        const question: string = (body.question ?? "").trim();
        if (!question) {
          return send(400, error("EmptyQuery", "question must be non-empty"));
        }
        const sessionId = `mock-${++counter}`;
        if (/sedimentation|esr/i.test(question)) {
          sessions.set(sessionId, { stage: "AwaitingFactors", lab: "esr" });
          return send(200, {
            session_id: sessionId,
            stage: "AwaitingFactors",
            questions: ESR_QUESTIONS,
          });
        }
        if (/aldolase/i.test(question)) {
          sessions.set(sessionId, { stage: "Answered", lab: "aldolase" });
          return send(200, {
            session_id: sessionId,
            stage: "Answered",
            answer: ALDOLASE_ANSWER,
          });
        }
        return send(404, error("NotInCorpus", "no matching lab test"));
      }

      const answersMatch = url.match(/^\/v1\/sessions\/([^/]+)\/answers$/);
      if (req.method === "POST" && answersMatch) {
        const session = sessions.get(answersMatch[1]);
        if (!session) {
          return send(404, error("UnknownSession", "no such session (or expired)"));
        }
        if (session.stage !== "AwaitingFactors") {
          return send(409, error("WrongStage", `cannot submit answers in stage ${session.stage}`));
        }
        const body = JSON.parse(Buffer.concat(chunks).toString() || "{}");
        const answers: Record<string, string> = body.answers ?? {};
        const missing = ESR_QUESTIONS.filter((q) => !(q.factor in answers)).map(
          (q) => q.factor,
        );
        if (missing.length) {
          return send(422, error("MissingFactor", `unanswered factors: ${missing}`, { factors: missing }));
        }
        for (const q of ESR_QUESTIONS) {
          if (!q.choices.includes(answers[q.factor])) {
            return send(422, error("InvalidChoice", `${answers[q.factor]} is not a valid choice for ${q.factor}`));
          }
        }
        session.stage = "Answered";
        return send(200, {
          stage: "Answered",
          answer: { ...ESR_ANSWER, factors_applied: answers },
        });
      }

      const getMatch = url.match(/^\/v1\/sessions\/([^/]+)$/);
      if (req.method === "GET" && getMatch) {
        const session = sessions.get(getMatch[1]);
        if (!session) {
          return send(404, error("UnknownSession", "no such session (or expired)"));
        }
        return send(200, { session_id: getMatch[1], stage: session.stage });
      }

      send(404, error("NotFound", "no such route"));
    });
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const { port } = server.address() as AddressInfo;
  return {
    url: `http://127.0.0.1:${port}`,
    close: () => new Promise((resolve) => server.close(() => resolve())),
  };
}
