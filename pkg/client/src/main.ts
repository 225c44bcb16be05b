#!/usr/bin/env node
/**
 * CLI entry point.  Example:
 *
 *   dcrab-client --host 127.0.0.1 --port 5000 --shots 1000 --noise 0.01
 *
 * --shots 0 means infinite-shot mode: the exact simulated fidelity is
 * reported with no standard error.  Prints a one-line JSON summary on exit.
 */

import { parseArgs } from "node:util";

import { runClient } from "./client.js";
import { MockExperiment } from "./experiment.js";

function numberOption(raw: string | undefined, fallback: number, name: string): number {
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isFinite(v)) throw new Error(`invalid ${name}: ${raw}`);
  return v;
}

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      host: { type: "string", default: "127.0.0.1" },
      port: { type: "string" },
      shots: { type: "string" },
      noise: { type: "string" },
      seed: { type: "string" },
      detuning: { type: "string" },
      timeout: { type: "string" },
    },
  });
  if (values.port === undefined) {
    console.error("error: --port is required");
    return 2;
  }
  const shots = Math.trunc(numberOption(values.shots, 0, "shots"));
  const experiment = new MockExperiment({
    detuning: numberOption(values.detuning, 1.0, "detuning"),
    shots: shots > 0 ? shots : null,
    noise: numberOption(values.noise, 0, "noise"),
    seed: Math.trunc(numberOption(values.seed, 0, "seed")),
  });
  try {
    const summary = await runClient(
      values.host!,
      Number(values.port),
      experiment,
      numberOption(values.timeout, 60, "timeout") * 1000,
    );
    console.log(
      JSON.stringify({
        evaluations: summary.evaluations,
        close_reason: summary.closeReason,
        best_J: summary.bestJ,
        protocol_error: summary.protocolError,
      }),
    );
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    console.log(JSON.stringify({ close_reason: null, error: (e as Error).message }));
    return 1;
  }
}

main().then((code) => process.exit(code));
