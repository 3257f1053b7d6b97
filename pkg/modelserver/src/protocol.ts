/**
 * Oracle wire protocol messages and the request handler shared by both
 * transports.  Every request gets exactly one response carrying its id;
 * malformed input produces an error response, never a crash.
 */

import { forward, preprocess, ServedModel } from "./checkpoint.js";

export interface QueryRequest {
  id: string;
  shape: number[];
  pixels: number[];
}

export type QueryResponse =
  | { id: string | null; probs: number[] }
  | { id: string | null; error: string };

export interface Meta {
  classes: number;
  input_shape: number[];
  preprocessing: unknown;
}

export function meta(model: ServedModel): Meta {
  return {
    classes: model.classes,
    input_shape: model.inputShape,
    preprocessing: model.preprocessing,
  };
}

function shapeMatches(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

export function handleQuery(model: ServedModel, raw: unknown): QueryResponse {
  if (typeof raw !== "object" || raw === null) {
    return { id: null, error: "request is not an object" };
  }
  const req = raw as Partial<QueryRequest>;
  const id = typeof req.id === "string" ? req.id : null;
  if (id === null) {
    return { id: null, error: "missing request id" };
  }
  if (!Array.isArray(req.shape) || !req.shape.every((v) => Number.isInteger(v) && v > 0)) {
    return { id, error: "missing or invalid shape" };
  }
  if (!shapeMatches(req.shape, model.inputShape)) {
    return { id, error: `shape [${req.shape}] does not match model input [${model.inputShape}]` };
  }
  if (!Array.isArray(req.pixels) || !req.pixels.every((v) => typeof v === "number" && Number.isFinite(v))) {
    return { id, error: "missing or non-numeric pixels" };
  }
  const expected = model.dIn;
  if (req.pixels.length !== expected) {
    return { id, error: `pixels has ${req.pixels.length} values, expected ${expected}` };
  }
  const probs = forward(model, preprocess(model, Float64Array.from(req.pixels)));
  return { id, probs: Array.from(probs) };
}

export function parseJsonLine(model: ServedModel, line: string): QueryResponse {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return { id: null, error: "line is not valid JSON" };
  }
  return handleQuery(model, raw);
}
