/**
 * HTTP transport: GET /meta and POST /query per the oracle protocol.
 */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";

import { ServedModel } from "./checkpoint.js";
import { handleQuery, meta } from "./protocol.js";

function sendJson(res: ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(body),
  });
  res.end(body);
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c: Buffer) => chunks.push(c));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    req.on("error", reject);
  });
}

export function createHttpServer(model: ServedModel): Server {
  return createServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/meta") {
        sendJson(res, 200, meta(model));
        return;
      }
      if (req.method === "POST" && req.url === "/query") {
        const body = await readBody(req);
        let raw: unknown;
        try {
          raw = JSON.parse(body);
        } catch {
          sendJson(res, 400, { id: null, error: "body is not valid JSON" });
          return;
        }
        const response = handleQuery(model, raw);
        sendJson(res, "error" in response ? 400 : 200, response);
        return;
      }
      sendJson(res, 404, { id: null, error: `no route ${req.method} ${req.url}` });
    } catch (err) {
      sendJson(res, 500, { id: null, error: String(err) });
    }
  });
}

export function startHttpServer(model: ServedModel, port: number): Promise<Server> {
  const server = createHttpServer(model);
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, "127.0.0.1", () => resolve(server));
  });
}
