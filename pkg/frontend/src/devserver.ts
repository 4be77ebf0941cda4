/**
 * Development harness: connects to a running `charlm serve` engine and serves
 * the rendered studio at http://localhost:8080. The page auto-refreshes and
 * commands are dispatched through /cmd links, which keeps the harness free of
 * client-side JavaScript while exercising the same view and client modules
 * the tests use.
 */

import * as http from "node:http";

import { EngineClient } from "./client.js";
import { Command } from "./protocol.js";
import { renderHTML } from "./ui.js";

const ENGINE_HOST = process.env.CHARLM_HOST ?? "127.0.0.1";
const ENGINE_PORT = Number(process.env.CHARLM_PORT ?? "7651");
const HTTP_PORT = Number(process.env.PORT ?? "8080");

const PAGE_HEAD = `<!doctype html><html><head>
<meta charset="utf-8"><meta http-equiv="refresh" content="1">
<title>charlm studio</title>
</head><body>`;

async function main(): Promise<void> {
  const client = new EngineClient({ host: ENGINE_HOST, port: ENGINE_PORT });
  await client.connect();

  const server = http.createServer((req, res) => {
    const url = new URL(req.url ?? "/", `http://localhost:${HTTP_PORT}`);
    if (url.pathname === "/cmd") {
      const raw = url.searchParams.get("json");
      if (raw) client.send(JSON.parse(raw) as Command);
      res.writeHead(302, { Location: "/" }).end();
      return;
    }
    res.writeHead(200, { "Content-Type": "text/html; charset=utf-8" });
    res.end(PAGE_HEAD + renderHTML(client.view) + "</body></html>");
  });
  server.listen(HTTP_PORT, () => {
    console.log(`studio at http://localhost:${HTTP_PORT} (engine ${ENGINE_HOST}:${ENGINE_PORT})`);
  });
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
