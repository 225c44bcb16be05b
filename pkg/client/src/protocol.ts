/**
 * Wire protocol: UTF-8 newline-delimited JSON messages over TCP.
 *
 * The server drives the session: session_open, then one pulse_request per
 * evaluation, finally session_close.  The client answers each pulse_request
 * with a fom_reply carrying the measured figure of merit J and, when shot
 * sampling is on, its standard error.
 */

import { z } from "zod";

const pulsePayload = z.object({
  times: z.array(z.number()).min(2),
  values: z.array(z.number()).min(2),
});

export type PulsePayload = z.infer<typeof pulsePayload>;

const base = { session: z.string() };

export const messageSchema = z.discriminatedUnion("type", [
  z.object({
    type: z.literal("session_open"),
    ...base,
    config: z.record(z.unknown()).optional(),
  }),
  z.object({
    type: z.literal("pulse_request"),
    ...base,
    iter: z.number().int().nonnegative(),
    pulses: z.array(pulsePayload).min(1),
  }),
  z.object({
    type: z.literal("fom_reply"),
    ...base,
    iter: z.number().int().nonnegative(),
    J: z.number().finite(),
    err: z.number().nonnegative().optional(),
  }),
  z.object({
    type: z.literal("session_close"),
    ...base,
    reason: z.string(),
    best_J: z.number().optional(),
  }),
  z.object({
    type: z.literal("error"),
    ...base,
    status: z.string(),
  }),
]);

export type LoopMessage = z.infer<typeof messageSchema>;

export class ProtocolError extends Error {}

export function decodeLine(line: string): LoopMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch (e) {
    throw new ProtocolError(`invalid JSON: ${(e as Error).message}`);
  }
  const parsed = messageSchema.safeParse(raw);
  if (!parsed.success) {
    throw new ProtocolError(`malformed message: ${parsed.error.issues[0].message}`);
  }
  return parsed.data;
}

export function encodeMessage(msg: LoopMessage): string {
  return JSON.stringify(msg);
}
