import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { writeRawTensor } from "../src/rawTensor.js";

/** Build a checkpoint directory from explicit parameter arrays. */
export function makeCheckpoint(
  inputShape: number[],
  classes: number,
  hidden: number,
  fill: (name: string, size: number) => Float64Array,
  preprocessing?: unknown
): string {
  const dir = mkdtempSync(join(tmpdir(), "ckpt-"));
  const dIn = inputShape.reduce((a, b) => a * b, 1);
  const shapes: Record<string, number[]> = {
    w1: [dIn, hidden],
    b1: [hidden],
    w2: [hidden, classes],
    b2: [classes],
  };
  const params: Record<string, string> = {};
  for (const [name, shape] of Object.entries(shapes)) {
    const size = shape.reduce((a, b) => a * b, 1);
    writeRawTensor(join(dir, `${name}.rt`), shape, fill(name, size));
    params[name] = `${name}.rt`;
  }
  const manifest = {
    format: "freqattack-mlp-v1",
    input_shape: inputShape,
    num_classes: classes,
    hidden,
    seed: 0,
    params,
    ...(preprocessing !== undefined ? { preprocessing } : {}),
  };
  writeFileSync(join(dir, "manifest.json"), JSON.stringify(manifest));
  return dir;
}

export function zeroCheckpoint(inputShape = [2, 2, 3], classes = 4, hidden = 8): string {
  return makeCheckpoint(inputShape, classes, hidden, (_name, size) => new Float64Array(size));
}
