/**
 * Closed-loop TCP client.  Connects, then lets the server drive: every
 * pulse_request is measured on the local mock experiment and answered with a
 * fom_reply; the loop ends at session_close.  Single-threaded, blocking on
 * the socket line stream.
 */

import * as net from "node:net";

import { MockExperiment } from "./experiment.js";
import { decodeLine, encodeMessage, LoopMessage, ProtocolError } from "./protocol.js";

export interface SessionSummary {
  evaluations: number;
  closeReason: string | null;
  bestJ: number | null;
  protocolError: string | null;
  transcript: LoopMessage[];
}

export function runClient(
  host: string,
  port: number,
  experiment: MockExperiment,
  timeoutMs = 60000,
): Promise<SessionSummary> {
  return new Promise((resolve, reject) => {
    const summary: SessionSummary = {
      evaluations: 0,
      closeReason: null,
      bestJ: null,
      protocolError: null,
      transcript: [],
    };
    const socket = net.createConnection({ host, port });
    socket.setTimeout(timeoutMs);
    let buffer = "";
    let finished = false;

    const finish = (err?: Error) => {
      if (finished) return;
      finished = true;
      socket.destroy();
      if (err) reject(err);
      else resolve(summary);
    };

    const handle = (msg: LoopMessage) => {
      summary.transcript.push(msg);
      switch (msg.type) {
        case "session_open":
          return;
        case "pulse_request": {
          const { times, values } = msg.pulses[0];
          const m = experiment.measure(times, values);
          const reply: LoopMessage = {
            type: "fom_reply",
            session: msg.session,
            iter: msg.iter,
            J: m.J,
            ...(m.err !== null ? { err: m.err } : {}),
          };
          summary.evaluations++;
          summary.transcript.push(reply);
          socket.write(encodeMessage(reply) + "\n");
          return;
        }
        case "session_close":
          summary.closeReason = msg.reason;
          summary.bestJ = msg.best_J ?? null;
          finish();
          return;
        case "error":
          summary.closeReason = `server error: ${msg.status}`;
          finish();
          return;
        case "fom_reply":
          throw new ProtocolError("client cannot handle fom_reply");
      }
    };

    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      let idx;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx).trim();
        buffer = buffer.slice(idx + 1);
        if (!line) continue;
        try {
          handle(line ? decodeLine(line) : ({} as LoopMessage));
        } catch (e) {
          if (e instanceof ProtocolError) {
            // malformed server line: log and stop cleanly
            summary.protocolError = e.message;
            console.error(`protocol error: ${e.message}`);
            finish();
          } else {
            finish(e as Error);
          }
          return;
        }
        if (finished) return;
      }
    });
    socket.on("timeout", () => finish(new Error("server went silent")));
    socket.on("error", (e) => finish(e));
    socket.on("close", () => {
      if (!finished && summary.closeReason === null) {
        finish(new Error("connection lost before session_close"));
      }
      finish();
    });
  });
}
