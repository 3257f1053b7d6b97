/**
 * Raw-tensor interchange format: one JSON header line
 * {"shape": [...], "dtype": "f64", "order": "little"} followed by the
 * row-major float64 little-endian payload.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface RawTensor {
  shape: number[];
  data: Float64Array;
}

export function parseRawTensor(buf: Buffer, context = "raw tensor"): RawTensor {
  const newline = buf.indexOf(0x0a);
  if (newline < 0) {
    throw new Error(`${context}: missing header line`);
  }
  let header: { shape?: unknown; dtype?: unknown; order?: unknown };
  try {
    header = JSON.parse(buf.subarray(0, newline).toString("ascii"));
  } catch {
    throw new Error(`${context}: header is not JSON`);
  }
  if (header.dtype !== "f64" || header.order !== "little" || !Array.isArray(header.shape)) {
    throw new Error(`${context}: unsupported header ${JSON.stringify(header)}`);
  }
  const shape = header.shape.map((v) => {
    if (typeof v !== "number" || !Number.isInteger(v) || v < 0) {
      throw new Error(`${context}: bad shape entry ${v}`);
    }
    return v;
  });
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = buf.subarray(newline + 1);
  if (payload.length !== count * 8) {
    throw new Error(`${context}: payload has ${payload.length} bytes, expected ${count * 8}`);
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = payload.readDoubleLE(i * 8);
  }
  return { shape, data };
}

export function readRawTensor(path: string): RawTensor {
  return parseRawTensor(readFileSync(path), path);
}

export function writeRawTensor(path: string, shape: number[], data: Float64Array): void {
  const header = Buffer.from(
    JSON.stringify({ shape, dtype: "f64", order: "little" }) + "\n",
    "ascii"
  );
  const payload = Buffer.alloc(data.length * 8);
  for (let i = 0; i < data.length; i++) {
    payload.writeDoubleLE(data[i], i * 8);
  }
  writeFileSync(path, Buffer.concat([header, payload]));
}
