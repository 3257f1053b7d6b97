/**
 * stdio transport: newline-delimited JSON, one request per line, responses
 * written strictly in request order.
 */

import { createInterface } from "node:readline";
import { Readable, Writable } from "node:stream";

import { ServedModel } from "./checkpoint.js";
import { parseJsonLine } from "./protocol.js";

export function runStdioServer(
  model: ServedModel,
  input: Readable = process.stdin,
  output: Writable = process.stdout
): Promise<void> {
  const rl = createInterface({ input, crlfDelay: Infinity });
  return new Promise((resolve) => {
    rl.on("line", (line) => {
      if (line.trim() === "") {
        return;
      }
      output.write(JSON.stringify(parseJsonLine(model, line)) + "\n");
    });
    rl.on("close", resolve);
  });
}
