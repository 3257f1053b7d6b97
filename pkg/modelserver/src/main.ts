#!/usr/bin/env node
/**
 * Model server entry point.
 *
 *   node dist/main.js --checkpoint <dir> --transport http --port 8630
 *   node dist/main.js --checkpoint <dir> --transport stdio
 */

import { loadCheckpoint } from "./checkpoint.js";
import { startHttpServer } from "./httpServer.js";
import { runStdioServer } from "./stdioServer.js";

interface Args {
  checkpoint?: string;
  transport: string;
  port: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { transport: "http", port: 8630 };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--checkpoint":
        args.checkpoint = argv[++i];
        break;
      case "--transport":
        args.transport = argv[++i];
        break;
      case "--port":
        args.port = Number(argv[++i]);
        break;
      case "--help":
        console.log("usage: main.js --checkpoint DIR [--transport http|stdio] [--port N]");
        process.exit(0);
        break;
      default:
        console.error(`unknown argument ${argv[i]}`);
        process.exit(2);
    }
  }
  return args;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  if (!args.checkpoint) {
    console.error("--checkpoint is required");
    process.exit(2);
  }
  const model = loadCheckpoint(args.checkpoint);
  if (args.transport === "http") {
    if (!Number.isInteger(args.port) || args.port < 0 || args.port > 65535) {
      console.error(`invalid port ${args.port}`);
      process.exit(2);
    }
    const server = await startHttpServer(model, args.port);
    const addr = server.address();
    const port = typeof addr === "object" && addr !== null ? addr.port : args.port;
    console.error(`serving ${args.checkpoint} on http://127.0.0.1:${port}`);
  } else if (args.transport === "stdio") {
    await runStdioServer(model);
  } else {
    console.error(`unknown transport ${args.transport}`);
    process.exit(2);
  }
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
