import { describe, expect, it } from "vitest";

import { decodeLine, encodeMessage, messageSchema, ProtocolError } from "../src/protocol.js";

describe("line codec", () => {
  it("round-trips every message type", () => {
    const msgs = [
      { type: "session_open", session: "s", config: { n_funcs: 2 } },
      {
        type: "pulse_request",
        session: "s",
        iter: 3,
        pulses: [{ times: [0, 1], values: [0.5, -0.5] }],
      },
      { type: "fom_reply", session: "s", iter: 3, J: 0.25, err: 0.01 },
      { type: "session_close", session: "s", reason: "target_reached", best_J: 0.999 },
      { type: "error", session: "s", status: "boom" },
    ] as const;
    for (const msg of msgs) {
      expect(decodeLine(encodeMessage(msg as any))).toEqual(msg);
    }
  });

  it("rejects invalid JSON", () => {
    expect(() => decodeLine("{not json")).toThrow(ProtocolError);
  });

  it("rejects unknown or incomplete messages", () => {
    expect(() => decodeLine('{"type": "launch", "session": "s"}')).toThrow(ProtocolError);
    expect(() => decodeLine('{"type": "fom_reply", "session": "s", "iter": 0}')).toThrow(
      ProtocolError,
    );
    expect(() =>
      decodeLine('{"type": "pulse_request", "session": "s", "iter": 0, "pulses": []}'),
    ).toThrow(ProtocolError);
  });

  it("validates a recorded transcript line by line", () => {
    const transcript = [
      '{"type": "session_open", "session": "ab12", "config": {"n_funcs": 2, "seed": 7}}',
      '{"type": "pulse_request", "session": "ab12", "iter": 0, "pulses": [{"times": [0.0, 0.5, 1.0], "values": [0.3, 0.3, 0.3]}]}',
      '{"type": "fom_reply", "session": "ab12", "iter": 0, "J": 0.71}',
      '{"type": "pulse_request", "session": "ab12", "iter": 1, "pulses": [{"times": [0.0, 0.5, 1.0], "values": [0.4, 0.5, 0.4]}]}',
      '{"type": "fom_reply", "session": "ab12", "iter": 1, "J": 0.83, "err": 0.012}',
      '{"type": "session_close", "session": "ab12", "reason": "stalled", "best_J": 0.83}',
    ];
    for (const line of transcript) {
      expect(messageSchema.safeParse(JSON.parse(line)).success).toBe(true);
    }
  });
});
