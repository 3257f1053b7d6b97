/**
 * Loads the portable two-layer-MLP checkpoint (JSON manifest + raw-tensor
 * parameter files) and reimplements the forward pass independently:
 * flatten -> dense -> relu -> dense -> softmax, all in float64.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { readRawTensor } from "./rawTensor.js";

const CHECKPOINT_FORMAT = "freqattack-mlp-v1";

/** Per-channel normalization applied server-side before the forward pass;
 * the attacker always speaks raw [0, 1] pixels. */
export interface Preprocessing {
  normalize: { mean: number[]; std: number[] } | null;
}

export interface ServedModel {
  inputShape: number[]; // [H, W, C]
  classes: number;
  hidden: number;
  w1: Float64Array; // (dIn, hidden) row-major
  b1: Float64Array;
  w2: Float64Array; // (hidden, classes) row-major
  b2: Float64Array;
  dIn: number;
  preprocessing: Preprocessing;
}

export function loadCheckpoint(dir: string): ServedModel {
  const manifest = JSON.parse(readFileSync(join(dir, "manifest.json"), "utf-8"));
  if (manifest.format !== CHECKPOINT_FORMAT) {
    throw new Error(`${dir}: not a ${CHECKPOINT_FORMAT} checkpoint`);
  }
  const inputShape: number[] = manifest.input_shape;
  const classes: number = manifest.num_classes;
  const hidden: number = manifest.hidden;
  const params: Record<string, string> = manifest.params;
  const dIn = inputShape.reduce((a, b) => a * b, 1);

  const read = (name: string, shape: number[]): Float64Array => {
    const t = readRawTensor(join(dir, params[name]));
    if (t.shape.length !== shape.length || t.shape.some((v, i) => v !== shape[i])) {
      throw new Error(`${name}: shape [${t.shape}] does not match manifest [${shape}]`);
    }
    return t.data;
  };

  return {
    inputShape,
    classes,
    hidden,
    dIn,
    w1: read("w1", [dIn, hidden]),
    b1: read("b1", [hidden]),
    w2: read("w2", [hidden, classes]),
    b2: read("b2", [classes]),
    preprocessing: parsePreprocessing(manifest.preprocessing, inputShape),
  };
}

function parsePreprocessing(raw: unknown, inputShape: number[]): Preprocessing {
  if (raw === undefined || raw === null) {
    return { normalize: null };
  }
  const spec = raw as { resize?: unknown; normalize?: unknown };
  if (spec.resize !== undefined && spec.resize !== null) {
    throw new Error("resize preprocessing is not supported by this wrapper");
  }
  if (spec.normalize === undefined || spec.normalize === null) {
    return { normalize: null };
  }
  const { mean, std } = spec.normalize as { mean?: unknown; std?: unknown };
  const channels = inputShape[inputShape.length - 1];
  if (
    !Array.isArray(mean) ||
    !Array.isArray(std) ||
    mean.length !== channels ||
    std.length !== channels ||
    ![...mean, ...std].every((v) => typeof v === "number" && Number.isFinite(v)) ||
    (std as number[]).some((v) => v === 0)
  ) {
    throw new Error(`normalize spec needs ${channels} finite mean/std values, std nonzero`);
  }
  return { normalize: { mean: mean as number[], std: std as number[] } };
}

/** Apply the declared preprocessing to raw pixels (channel-last layout). */
export function preprocess(model: ServedModel, pixels: Float64Array): Float64Array {
  const norm = model.preprocessing.normalize;
  if (norm === null) {
    return pixels;
  }
  const channels = model.inputShape[model.inputShape.length - 1];
  const out = new Float64Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) {
    const c = i % channels;
    out[i] = (pixels[i] - norm.mean[c]) / norm.std[c];
  }
  return out;
}

export function forward(model: ServedModel, pixels: Float64Array): Float64Array {
  const { dIn, hidden, classes, w1, b1, w2, b2 } = model;
  if (pixels.length !== dIn) {
    throw new Error(`input has ${pixels.length} values, model expects ${dIn}`);
  }
  const h = new Float64Array(hidden);
  for (let j = 0; j < hidden; j++) {
    let s = b1[j];
    for (let i = 0; i < dIn; i++) {
      s += pixels[i] * w1[i * hidden + j];
    }
    h[j] = s > 0 ? s : 0;
  }
  const z = new Float64Array(classes);
  let zMax = -Infinity;
  for (let k = 0; k < classes; k++) {
    let s = b2[k];
    for (let j = 0; j < hidden; j++) {
      s += h[j] * w2[j * classes + k];
    }
    z[k] = s;
    if (s > zMax) zMax = s;
  }
  let total = 0;
  const probs = new Float64Array(classes);
  for (let k = 0; k < classes; k++) {
    probs[k] = Math.exp(z[k] - zMax);
    total += probs[k];
  }
  for (let k = 0; k < classes; k++) {
    probs[k] /= total;
  }
  return probs;
}
